//! Minimal differentiable-computation stack.
//!
//! A fixed layer vocabulary with hand-written backward passes — no general
//! autodiff tape. The model zoo is small and static, so every layer keeps
//! its own forward cache and the caller wires backward passes in reverse
//! order; correctness is enforced by finite-difference gradient checks.
//! All arithmetic is f64 and a NaN anywhere is a hard error, never a
//! silently propagated value.

mod checkpoint;
mod init;
mod layers;
mod loss;
mod mixup;
mod optim;
mod tensor;

pub use checkpoint::{
    file_sha256, load_checkpoint, save_checkpoint, LoadedCheckpoint, ParamInfo, CHECKPOINT_MAGIC,
};
pub use init::kaiming_uniform;
pub use layers::{
    global_avg_max_pool, global_avg_max_pool_backward, max_pool1d_2, max_pool1d_2_backward, relu,
    relu_backward, sigmoid, sigmoid_backward, sigmoid_scalar, Conv1dK1, Conv1dK3, Linear,
    PoolCache,
};
pub use loss::{bce_with_logits, BceLoss};
pub use mixup::{mixup, mixup_with_alpha, sample_alpha, MixupConfig};
pub use optim::{lr_at, Adam, AdamConfig};
pub use tensor::{Param, Tensor};
