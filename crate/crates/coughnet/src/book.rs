//! Compiles every code block in the narrative guide as a doc-test, so the
//! book can never drift from the library it documents. Each chapter becomes
//! one empty module carrying the chapter text as its documentation.

macro_rules! chapter {
    ($name:ident, $path:literal) => {
        #[doc = include_str!($path)]
        mod $name {}
    };
}

chapter!(overview, "../../../book/src/overview.md");
chapter!(features, "../../../book/src/features.md");
chapter!(models, "../../../book/src/models.md");
chapter!(training, "../../../book/src/training.md");
chapter!(fusion, "../../../book/src/fusion.md");
chapter!(evaluation, "../../../book/src/evaluation.md");
chapter!(cli, "../../../book/src/cli.md");
