use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited by backend")]
    RateLimited,
    #[error("request exceeds context window ({needed} > {limit} tokens)")]
    ContextOverflow { needed: usize, limit: usize },
}

/// A binary attachment for multimodal backends.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Attachment {
    pub mime: String,
    pub bytes: Arc<[u8]>,
}

/// A language-model-like service: instructions plus content in, text out.
pub trait ExtractionBackend: Send + Sync {
    fn submit(&self, prompt: &str, content: &str, token_budget: usize) -> Result<String, BackendError>;

    /// Maximum request size in tokens, prompt and content together.
    fn context_limit(&self) -> usize;

    fn is_multimodal(&self) -> bool {
        false
    }

    /// Submission with binary attachments. Text-only backends ignore them.
    fn submit_with_attachments(
        &self,
        prompt: &str,
        content: &str,
        token_budget: usize,
        _attachments: &[Attachment],
    ) -> Result<String, BackendError> {
        self.submit(prompt, content, token_budget)
    }
}

impl<B: ExtractionBackend + ?Sized> ExtractionBackend for Arc<B> {
    fn submit(&self, prompt: &str, content: &str, token_budget: usize) -> Result<String, BackendError> {
        (**self).submit(prompt, content, token_budget)
    }

    fn context_limit(&self) -> usize {
        (**self).context_limit()
    }

    fn is_multimodal(&self) -> bool {
        (**self).is_multimodal()
    }

    fn submit_with_attachments(
        &self,
        prompt: &str,
        content: &str,
        token_budget: usize,
        attachments: &[Attachment],
    ) -> Result<String, BackendError> {
        (**self).submit_with_attachments(prompt, content, token_budget, attachments)
    }
}

/// Token estimate used for budgets: characters divided by `chars_per_token`,
/// rounded up.
pub fn estimate_tokens(text: &str, chars_per_token: usize) -> usize {
    text.chars().count().div_ceil(chars_per_token.max(1))
}

/// Counts calls passing through to the wrapped backend.
pub struct Counting<B> {
    inner: B,
    calls: AtomicUsize,
}

impl<B> Counting<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<B: ExtractionBackend> ExtractionBackend for Counting<B> {
    fn submit(&self, prompt: &str, content: &str, token_budget: usize) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.submit(prompt, content, token_budget)
    }

    fn context_limit(&self) -> usize {
        self.inner.context_limit()
    }

    fn is_multimodal(&self) -> bool {
        self.inner.is_multimodal()
    }

    fn submit_with_attachments(
        &self,
        prompt: &str,
        content: &str,
        token_budget: usize,
        attachments: &[Attachment],
    ) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.submit_with_attachments(prompt, content, token_budget, attachments)
    }
}

/// Spaces calls at least `min_interval` apart across all threads.
pub struct RateLimited<B> {
    inner: B,
    min_interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl<B> RateLimited<B> {
    pub fn new(inner: B, min_interval: Duration) -> Self {
        Self {
            inner,
            min_interval,
            next_slot: Mutex::new(None),
        }
    }

    fn wait_turn(&self) {
        if self.min_interval.is_zero() {
            return;
        }
        let wait = {
            let mut slot = self.next_slot.lock().unwrap_or_else(|p| p.into_inner());
            let now = Instant::now();
            let start = slot.map_or(now, |s| s.max(now));
            *slot = Some(start + self.min_interval);
            start - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

impl<B: ExtractionBackend> ExtractionBackend for RateLimited<B> {
    fn submit(&self, prompt: &str, content: &str, token_budget: usize) -> Result<String, BackendError> {
        self.wait_turn();
        self.inner.submit(prompt, content, token_budget)
    }

    fn context_limit(&self) -> usize {
        self.inner.context_limit()
    }

    fn is_multimodal(&self) -> bool {
        self.inner.is_multimodal()
    }

    fn submit_with_attachments(
        &self,
        prompt: &str,
        content: &str,
        token_budget: usize,
        attachments: &[Attachment],
    ) -> Result<String, BackendError> {
        self.wait_turn();
        self.inner.submit_with_attachments(prompt, content, token_budget, attachments)
    }
}
