//! The interface every candidate generator implements.

use std::sync::Arc;

use crate::text::Context;

/// Produces a ranked list of at most `k` candidate actions for a context.
///
/// Implementations are read-only after construction and may be shared
/// across actor threads.
pub trait ActionModel: Send + Sync {
    fn generate(&self, context: &Context, k: usize) -> Vec<String>;

    /// Short label used in reports.
    fn name(&self) -> &str {
        "model"
    }
}

impl<M: ActionModel + ?Sized> ActionModel for Arc<M> {
    fn generate(&self, context: &Context, k: usize) -> Vec<String> {
        (**self).generate(context, k)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<M: ActionModel + ?Sized> ActionModel for &M {
    fn generate(&self, context: &Context, k: usize) -> Vec<String> {
        (**self).generate(context, k)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

/// Always returns nothing; the empty baseline in comparisons.
#[derive(Clone, Copy, Debug, Default)]
pub struct EmptyModel;

impl ActionModel for EmptyModel {
    fn generate(&self, _: &Context, _: usize) -> Vec<String> {
        Vec::new()
    }

    fn name(&self) -> &str {
        "empty"
    }
}
