//! Text-generation backends: an HTTP chat-completion client and a
//! deterministic offline generator.

use std::time::Duration;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::template::{render_prompt, ItemRef, Language, PromptTemplate};
use crate::augment::sampling::{stable_hash, stream_rng};

/// Environment variable holding the bearer token for the HTTP backend.
pub const TOKEN_ENV: &str = "CRSBIAS_LLM_TOKEN";

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("backend unreachable after {attempts} attempt(s): {message}")]
    Unreachable { attempts: u32, message: String },
    #[error("backend returned HTTP {status} after {attempts} attempt(s)")]
    Status { status: u16, attempts: u32 },
    #[error("backend returned an empty completion")]
    EmptyCompletion,
    #[error("malformed backend response: {0}")]
    BadResponse(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("prompt error: {0}")]
    Prompt(String),
}

/// Produces raw dialogue text for one item.
pub trait DialogueGenerator: Sync {
    fn generate(&self, template: &PromptTemplate, item: &ItemRef, seed: u64) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay_ms: 500,
            max_delay_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based), doubling each time.
    pub fn delay(&self, attempt: u32) -> Duration {
        let ms = self
            .base_delay_ms
            .saturating_mul(1u64 << attempt.saturating_sub(1).min(30));
        Duration::from_millis(ms.min(self.max_delay_ms))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpChatConfig {
    /// Base URL; requests go to `<base_url>/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Bearer token. Resolved from [`TOKEN_ENV`] by [`HttpChatConfig::from_env`];
    /// never serialised.
    #[serde(skip)]
    pub token: Option<String>,
    pub timeout_ms: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub temperature: Option<f64>,
}

impl HttpChatConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            token: None,
            timeout_ms: 60_000,
            retry: RetryPolicy::default(),
            temperature: None,
        }
    }

    pub fn from_env(mut self) -> Result<Self, BackendError> {
        match std::env::var(TOKEN_ENV) {
            Ok(t) if !t.is_empty() => {
                self.token = Some(t);
                Ok(self)
            }
            _ => Err(BackendError::Auth(format!("environment variable {TOKEN_ENV} is not set"))),
        }
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

enum Attempt {
    Done(String),
    Retry(BackendError),
    Fail(BackendError),
}

pub struct HttpChatBackend {
    config: HttpChatConfig,
    agent: ureq::Agent,
}

impl HttpChatBackend {
    pub fn new(config: HttpChatConfig) -> Result<Self, BackendError> {
        if config.token.is_none() {
            return Err(BackendError::Auth(format!("no token; set {TOKEN_ENV}")));
        }
        if config.retry.max_attempts == 0 {
            return Err(BackendError::Config("retry.max_attempts must be at least 1".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { config, agent })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &[u8], attempts: u32) -> Attempt {
        let token = self.config.token.as_deref().unwrap_or_default();
        let result = self
            .agent
            .post(&self.endpoint())
            .header("Authorization", &format!("Bearer {token}"))
            .header("Content-Type", "application/json")
            .send(body);
        let mut resp = match result {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(BackendError::Timeout { attempts }),
            Err(e) => {
                return Attempt::Retry(BackendError::Unreachable {
                    attempts,
                    message: e.to_string(),
                })
            }
        };
        let status = resp.status().as_u16();
        match status {
            200..=299 => {}
            401 | 403 => return Attempt::Fail(BackendError::Auth(format!("HTTP {status}"))),
            408 | 429 | 500..=599 => return Attempt::Retry(BackendError::Status { status, attempts }),
            _ => return Attempt::Fail(BackendError::Status { status, attempts }),
        }
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(BackendError::Timeout { attempts }),
            Err(e) => return Attempt::Fail(BackendError::BadResponse(e.to_string())),
        };
        let parsed: ChatResponse = match serde_json::from_str(&text) {
            Ok(p) => p,
            Err(e) => return Attempt::Fail(BackendError::BadResponse(e.to_string())),
        };
        match parsed.choices.into_iter().next().and_then(|c| c.message.content) {
            Some(c) if !c.trim().is_empty() => Attempt::Done(c),
            _ => Attempt::Fail(BackendError::EmptyCompletion),
        }
    }
}

impl DialogueGenerator for HttpChatBackend {
    fn generate(&self, template: &PromptTemplate, item: &ItemRef, seed: u64) -> Result<String, BackendError> {
        let prompt = render_prompt(template, item).map_err(|e| BackendError::Prompt(e.to_string()))?;
        let mut messages = Vec::with_capacity(2);
        if !template.system_preamble.is_empty() {
            messages.push(ChatMessage {
                role: "system",
                content: &template.system_preamble,
            });
        }
        messages.push(ChatMessage {
            role: "user",
            content: &prompt,
        });
        let body = serde_json::to_vec(&ChatRequest {
            model: &self.config.model,
            messages,
            seed,
            temperature: self.config.temperature,
        })
        .map_err(|e| BackendError::BadResponse(e.to_string()))?;

        let max = self.config.retry.max_attempts;
        let mut attempt = 1;
        loop {
            match self.attempt(&body, attempt) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) if attempt >= max => return Err(e),
                Attempt::Retry(e) => {
                    log::warn!("backend attempt {attempt}/{max} failed: {e}; retrying");
                    std::thread::sleep(self.config.retry.delay(attempt));
                    attempt += 1;
                }
            }
        }
    }
}

/// Deterministic phrase-bank generator. Output depends only on the template
/// id and language, the item, and the seed.
#[derive(Debug, Clone, Copy, Default)]
pub struct OfflineBackend;

struct PhraseBank {
    seeker: &'static str,
    recommender: &'static str,
    openers: &'static [&'static str],
    probes: &'static [&'static str],
    tastes: &'static [&'static str],
    pitches: &'static [&'static str],
    reactions: &'static [&'static str],
    closings: &'static [&'static str],
}

const EN: PhraseBank = PhraseBank {
    seeker: "User",
    recommender: "System",
    openers: &[
        "Hi! I'm looking for a movie to watch tonight.",
        "Hey, could you suggest something good to watch?",
        "Hello, I need a film recommendation for the weekend.",
        "Hi there, I'm bored and want to see a movie.",
    ],
    probes: &[
        "Sure! What kind of movies have you enjoyed lately?",
        "Happy to help. Any genres you are in the mood for?",
        "Of course. Tell me a bit about what you like.",
    ],
    tastes: &[
        "I like stories with a clever twist.",
        "Something light and funny would be great.",
        "I enjoy dramas with strong characters.",
        "I'm in the mood for something exciting.",
        "I like older classics more than new releases.",
    ],
    pitches: &[
        "You might really enjoy {name}. It fits what you described.",
        "Have you seen {name}? I think it would be a great pick.",
        "I would recommend {name}, a lot of people with your taste love it.",
        "How about {name}? It should be right up your alley.",
    ],
    reactions: &[
        "That sounds great, I'll check it out. Thanks!",
        "I haven't seen it yet, I'll give it a try.",
        "Nice, I've heard good things about it.",
    ],
    closings: &["Enjoy the movie!", "Happy watching!", "Have a great time watching it."],
};

const ZH: PhraseBank = PhraseBank {
    seeker: "用户",
    recommender: "系统",
    openers: &["你好，我想找一部电影今晚看。", "能给我推荐一部好看的电影吗？", "周末想看电影，有什么推荐吗？"],
    probes: &["当然可以！你最近喜欢什么类型的电影？", "好的，你想看哪种风格的？", "没问题，说说你的喜好吧。"],
    tastes: &["我喜欢剧情有反转的故事。", "想看轻松搞笑一点的。", "我喜欢人物刻画细腻的剧情片。", "想看点刺激的。"],
    pitches: &["推荐你看《{name}》，很符合你的口味。", "你看过《{name}》吗？我觉得很适合你。", "可以试试《{name}》，评价很好。"],
    reactions: &["听起来不错，我去看看，谢谢！", "还没看过，我试试。", "好的，听说这部挺好的。"],
    closings: &["祝你观影愉快！", "看得开心！"],
};

impl DialogueGenerator for OfflineBackend {
    fn generate(&self, template: &PromptTemplate, item: &ItemRef, seed: u64) -> Result<String, BackendError> {
        // Same validation as the HTTP path, so bad templates fail the same way.
        render_prompt(template, item).map_err(|e| BackendError::Prompt(e.to_string()))?;
        let bank = match template.language {
            Language::En => &EN,
            Language::Zh => &ZH,
        };
        let mut rng = stream_rng(
            seed,
            &[stable_hash(&template.template_id), stable_hash(&item.id), stable_hash(&item.name)],
        );
        let pick = |rng: &mut rand_chacha::ChaCha8Rng, xs: &[&'static str]| -> &'static str {
            xs.choose(rng).copied().unwrap_or_default()
        };
        let (s, r) = (bank.seeker, bank.recommender);
        let mut lines = vec![
            format!("{s}: {}", pick(&mut rng, bank.openers)),
            format!("{r}: {}", pick(&mut rng, bank.probes)),
            format!("{s}: {}", pick(&mut rng, bank.tastes)),
            format!("{r}: {}", pick(&mut rng, bank.pitches).replace("{name}", &item.name)),
            format!("{s}: {}", pick(&mut rng, bank.reactions)),
        ];
        if rng.random_bool(0.5) {
            lines.push(format!("{r}: {}", pick(&mut rng, bank.closings)));
        }
        Ok(lines.join("\n"))
    }
}

/// Configured backend.
pub enum GenerationBackend {
    HttpChat(HttpChatBackend),
    OfflineTemplate(OfflineBackend),
}

impl DialogueGenerator for GenerationBackend {
    fn generate(&self, template: &PromptTemplate, item: &ItemRef, seed: u64) -> Result<String, BackendError> {
        match self {
            GenerationBackend::HttpChat(b) => b.generate(template, item, seed),
            GenerationBackend::OfflineTemplate(b) => b.generate(template, item, seed),
        }
    }
}
