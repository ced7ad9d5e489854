//! HTTP client for chat- or completion-style model endpoints.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    backoff_delay, prompt_text, BackendKind, Classifier, ClassifierRef, ClassifyError,
    ClassifyOutput, Completer, Label, PromptStyle, Unmappable, Verdict, PROMPT_SEPARATOR,
};
use crate::record::Record;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestShape {
    /// `{model, messages: [{role: "user", content}]}`
    #[default]
    Chat,
    /// `{model, prompt}`
    Completion,
}

fn default_tries() -> u32 {
    5
}

fn default_base() -> u64 {
    1000
}

fn default_factor() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    #[serde(default = "default_tries")]
    pub max_tries: u32,
    #[serde(default = "default_base")]
    pub base_delay_ms: u64,
    #[serde(default = "default_factor")]
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_tries: default_tries(),
            base_delay_ms: default_base(),
            factor: default_factor(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Sends one POST. `Err` means no HTTP response was received at all.
pub trait Transport: Send + Sync {
    fn post(&self, url: &str, headers: &[(String, String)], body: &str)
        -> Result<HttpResponse, String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new() -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build();
        UreqTransport {
            agent: config.into(),
        }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for UreqTransport {
    fn post(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &str,
    ) -> Result<HttpResponse, String> {
        let mut req = self.agent.post(url);
        for (k, v) in headers {
            req = req.header(k, v);
        }
        let mut resp = req.send(body).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

struct TokenBucket {
    rate: f64,
    capacity: f64,
    tokens: f64,
    last: Instant,
}

impl TokenBucket {
    fn new(rate: f64) -> Self {
        let capacity = rate.max(1.0);
        TokenBucket {
            rate,
            capacity,
            tokens: capacity,
            last: Instant::now(),
        }
    }

    /// Takes a token, or returns how long to wait for one.
    fn try_take(&mut self) -> Option<Duration> {
        let now = Instant::now();
        let dt = now.duration_since(self.last).as_secs_f64();
        self.last = now;
        self.tokens = (self.tokens + dt * self.rate).min(self.capacity);
        if self.tokens >= 1.0 {
            self.tokens -= 1.0;
            None
        } else {
            Some(Duration::from_secs_f64((1.0 - self.tokens) / self.rate))
        }
    }
}

type Sleeper = Box<dyn Fn(Duration) + Send + Sync>;

pub struct ExternalClient {
    endpoint: String,
    model: String,
    api_key: String,
    shape: RequestShape,
    retry: RetryPolicy,
    max_in_flight: usize,
    transport: Box<dyn Transport>,
    bucket: Option<Mutex<TokenBucket>>,
    sleep: Sleeper,
}

impl ExternalClient {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: impl Into<String>,
        transport: Box<dyn Transport>,
    ) -> Self {
        ExternalClient {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: api_key.into(),
            shape: RequestShape::Chat,
            retry: RetryPolicy::default(),
            max_in_flight: 4,
            transport,
            bucket: None,
            sleep: Box::new(std::thread::sleep),
        }
    }

    /// Builds a client from config, reading the API key from the environment
    /// variable the config names.
    pub fn from_ref(r: &ClassifierRef, transport: Box<dyn Transport>) -> Result<Self, ClassifyError> {
        r.validate()?;
        let var = r.credential_env.as_deref().expect("validated");
        let key = std::env::var(var).map_err(|_| {
            ClassifyError::Unavailable(format!("environment variable {var} is not set"))
        })?;
        Ok(ExternalClient::new(
            r.endpoint.clone().expect("validated"),
            r.model.clone().expect("validated"),
            key,
            transport,
        )
        .with_shape(r.request_shape)
        .with_retry(r.retry.clone())
        .with_rate_limit(r.rate_limit_per_sec)
        .with_max_in_flight(r.max_in_flight))
    }

    pub fn with_shape(mut self, shape: RequestShape) -> Self {
        self.shape = shape;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Requests per second; zero or negative disables the limit.
    pub fn with_rate_limit(mut self, per_sec: f64) -> Self {
        self.bucket = (per_sec > 0.0).then(|| Mutex::new(TokenBucket::new(per_sec)));
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    /// Replaces the backoff sleep, for tests.
    pub fn with_sleeper(mut self, f: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Box::new(f);
        self
    }

    pub fn identity(&self) -> String {
        format!("external:{}:{}:{:?}", self.endpoint, self.model, self.shape)
    }

    /// JSON request body for a prompt given without the separator.
    pub fn request_body(&self, prompt: &str) -> String {
        let full = format!("{prompt}{PROMPT_SEPARATOR}");
        let v = match self.shape {
            RequestShape::Chat => json!({
                "model": self.model,
                "messages": [{"role": "user", "content": full}],
            }),
            RequestShape::Completion => json!({"model": self.model, "prompt": full}),
        };
        v.to_string()
    }

    fn extract_text(&self, body: &str) -> Result<String, ClassifyError> {
        let v: Value =
            serde_json::from_str(body).map_err(|e| ClassifyError::BadResponse(e.to_string()))?;
        let choice = &v["choices"][0];
        let text = match self.shape {
            RequestShape::Chat => choice["message"]["content"].as_str(),
            RequestShape::Completion => choice["text"].as_str(),
        };
        text.map(str::to_string)
            .ok_or_else(|| ClassifyError::BadResponse("no text in first choice".into()))
    }

    fn throttle(&self) {
        if let Some(bucket) = &self.bucket {
            loop {
                let wait = bucket.lock().expect("rate limiter poisoned").try_take();
                match wait {
                    None => return,
                    Some(d) => std::thread::sleep(d),
                }
            }
        }
    }

    /// Sends one prompt, retrying on 429, 5xx and transport failures.
    pub fn complete_one(&self, prompt: &str) -> Result<String, ClassifyError> {
        let body = self.request_body(prompt);
        let headers = vec![
            ("Content-Type".to_string(), "application/json".to_string()),
            ("Authorization".to_string(), format!("Bearer {}", self.api_key)),
        ];
        let tries = self.retry.max_tries.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            self.throttle();
            let (status, message) = match self.transport.post(&self.endpoint, &headers, &body) {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    return self.extract_text(&resp.body)
                }
                Ok(resp) if resp.status == 429 || resp.status >= 500 => {
                    (Some(resp.status), format!("status {}", resp.status))
                }
                Ok(resp) => {
                    return Err(ClassifyError::Http {
                        status: Some(resp.status),
                        attempts: attempt,
                        message: format!("status {}: {}", resp.status, resp.body.trim()),
                    })
                }
                Err(e) => (None, e),
            };
            if attempt >= tries {
                return Err(ClassifyError::Http {
                    status,
                    attempts: attempt,
                    message,
                });
            }
            log::warn!("request failed ({message}); retry {attempt}/{}", tries - 1);
            (self.sleep)(backoff_delay(&self.retry, attempt));
        }
    }

    /// Sends every prompt with at most `max_in_flight` requests outstanding.
    /// Results come back in input order.
    pub fn complete_many(&self, prompts: &[String]) -> Vec<Result<String, ClassifyError>> {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<String, ClassifyError>>>> =
            prompts.iter().map(|_| Mutex::new(None)).collect();
        let workers = self.max_in_flight.min(prompts.len()).max(1);
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= prompts.len() {
                        break;
                    }
                    let r = self.complete_one(&prompts[i]);
                    *slots[i].lock().expect("slot poisoned") = Some(r);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().expect("slot poisoned").expect("every slot filled"))
            .collect()
    }
}

impl Completer for ExternalClient {
    fn complete(&self, items: &[(String, String)]) -> Vec<Result<String, ClassifyError>> {
        let prompts: Vec<String> = items.iter().map(|(_, p)| p.clone()).collect();
        self.complete_many(&prompts)
    }
}

pub struct ExternalClassifier {
    client: ExternalClient,
    style: PromptStyle,
}

impl ExternalClassifier {
    pub fn new(client: ExternalClient, style: PromptStyle) -> Self {
        ExternalClassifier { client, style }
    }
}

impl Classifier for ExternalClassifier {
    fn kind(&self) -> BackendKind {
        BackendKind::External
    }

    fn identity(&self) -> String {
        format!("{}:{:?}", self.client.identity(), self.style)
    }

    fn classify(&self, records: &[Record]) -> Result<ClassifyOutput, ClassifyError> {
        let prompts: Vec<String> = records.iter().map(|r| prompt_text(r, self.style)).collect();
        let mut out = ClassifyOutput::default();
        for (r, res) in records.iter().zip(self.client.complete_many(&prompts)) {
            let text = res?;
            match Label::from_response(&text) {
                Some(label) => out.verdicts.push(Verdict {
                    ut: r.ut.clone(),
                    label,
                    score: None,
                    backend: BackendKind::External,
                }),
                None => out.unmappable.push(Unmappable {
                    ut: r.ut.clone(),
                    response: text,
                }),
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    /// Replies from a script; records request bodies and peak concurrency.
    struct Mock {
        script: Mutex<Vec<Result<HttpResponse, String>>>,
        reply: fn(&str) -> HttpResponse,
        bodies: Mutex<Vec<String>>,
        live: AtomicUsize,
        peak: AtomicUsize,
        delay: Duration,
    }

    impl Mock {
        fn new(reply: fn(&str) -> HttpResponse) -> Self {
            Mock {
                script: Mutex::new(Vec::new()),
                reply,
                bodies: Mutex::new(Vec::new()),
                live: AtomicUsize::new(0),
                peak: AtomicUsize::new(0),
                delay: Duration::ZERO,
            }
        }
    }

    impl Transport for Arc<Mock> {
        fn post(&self, _: &str, _: &[(String, String)], body: &str) -> Result<HttpResponse, String> {
            let n = self.live.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(n, Ordering::SeqCst);
            std::thread::sleep(self.delay);
            self.bodies.lock().unwrap().push(body.to_string());
            let scripted = {
                let mut s = self.script.lock().unwrap();
                (!s.is_empty()).then(|| s.remove(0))
            };
            self.live.fetch_sub(1, Ordering::SeqCst);
            scripted.unwrap_or_else(|| Ok((self.reply)(body)))
        }
    }

    fn chat(text: &str) -> HttpResponse {
        HttpResponse {
            status: 200,
            body: json!({"choices": [{"message": {"role": "assistant", "content": text}}]})
                .to_string(),
        }
    }

    fn status(code: u16) -> Result<HttpResponse, String> {
        Ok(HttpResponse {
            status: code,
            body: "{}".into(),
        })
    }

    fn client(mock: &Arc<Mock>) -> (ExternalClient, Arc<Mutex<Vec<Duration>>>) {
        let slept = Arc::new(Mutex::new(Vec::new()));
        let s2 = slept.clone();
        let c = ExternalClient::new("http://model/v1/chat/completions", "ft-ada", "k", Box::new(mock.clone()))
            .with_sleeper(move |d| s2.lock().unwrap().push(d));
        (c, slept)
    }

    fn rec(ut: &str, title: &str) -> Record {
        Record {
            ut: ut.into(),
            title: title.into(),
            ..Default::default()
        }
    }

    #[test]
    fn maps_trimmed_response() {
        let mock = Arc::new(Mock::new(|_| chat(" AI\n")));
        let (c, _) = client(&mock);
        let out = ExternalClassifier::new(c, PromptStyle::Title)
            .classify(&[rec("W1", "Deep nets")])
            .unwrap();
        assert_eq!(out.verdicts[0].label, Label::Ai);
        assert_eq!(out.verdicts[0].backend, BackendKind::External);
    }

    #[test]
    fn unmappable_is_not_coerced() {
        let mock = Arc::new(Mock::new(|_| chat("probably AI")));
        let (c, _) = client(&mock);
        let out = ExternalClassifier::new(c, PromptStyle::Title)
            .classify(&[rec("W1", "x")])
            .unwrap();
        assert!(out.verdicts.is_empty());
        assert_eq!(out.unmappable[0].response, "probably AI");
    }

    #[test]
    fn body_shapes_carry_separator_once() {
        let mock = Arc::new(Mock::new(|_| chat("other")));
        let (c, _) = client(&mock);
        let b: Value = serde_json::from_str(&c.request_body("Title")).unwrap();
        assert_eq!(b["model"], "ft-ada");
        assert_eq!(b["messages"][0]["role"], "user");
        assert_eq!(b["messages"][0]["content"], "Title\n\n###\n\n");
        let c = c.with_shape(RequestShape::Completion);
        let body = c.request_body("Title");
        let b: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(b["prompt"], "Title\n\n###\n\n");
        assert_eq!(body.matches("\\n\\n###\\n\\n").count(), 1);
    }

    #[test]
    fn retries_with_exponential_backoff() {
        let mock = Arc::new(Mock::new(|_| chat("ai")));
        *mock.script.lock().unwrap() = vec![status(429), status(503), Err("reset".into())];
        let (c, slept) = client(&mock);
        assert_eq!(c.complete_one("t").unwrap(), "ai");
        let ms: Vec<u128> = slept.lock().unwrap().iter().map(|d| d.as_millis()).collect();
        assert_eq!(ms, vec![1000, 2000, 4000]);
    }

    #[test]
    fn gives_up_after_max_tries() {
        let mock = Arc::new(Mock::new(|_| HttpResponse {
            status: 500,
            body: String::new(),
        }));
        let (c, slept) = client(&mock);
        match c.complete_one("t") {
            Err(ClassifyError::Http {
                status: Some(500),
                attempts: 5,
                ..
            }) => {}
            other => panic!("{other:?}"),
        }
        assert_eq!(slept.lock().unwrap().len(), 4);
        assert_eq!(mock.bodies.lock().unwrap().len(), 5);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let mock = Arc::new(Mock::new(|_| chat("ai")));
        *mock.script.lock().unwrap() = vec![status(401)];
        let (c, slept) = client(&mock);
        assert!(matches!(
            c.complete_one("t"),
            Err(ClassifyError::Http { status: Some(401), attempts: 1, .. })
        ));
        assert!(slept.lock().unwrap().is_empty());
    }

    #[test]
    fn bounded_in_flight_and_ordered_results() {
        let mut m = Mock::new(|body| {
            let v: Value = serde_json::from_str(body).unwrap();
            let content = v["messages"][0]["content"].as_str().unwrap();
            chat(content.trim_end_matches(PROMPT_SEPARATOR))
        });
        m.delay = Duration::from_millis(5);
        let mock = Arc::new(m);
        let (c, _) = client(&mock);
        let c = c.with_max_in_flight(3);
        let prompts: Vec<String> = (0..24).map(|i| format!("p{i}")).collect();
        let got: Vec<String> = c.complete_many(&prompts).into_iter().map(|r| r.unwrap()).collect();
        assert_eq!(got, prompts);
        let peak = mock.peak.load(Ordering::SeqCst);
        assert!((1..=3).contains(&peak), "peak {peak}");
    }

    #[test]
    fn token_bucket_spaces_requests() {
        let mock = Arc::new(Mock::new(|_| chat("ai")));
        let (c, _) = client(&mock);
        let c = c.with_rate_limit(50.0).with_max_in_flight(1);
        let prompts: Vec<String> = (0..60).map(|i| i.to_string()).collect();
        let t = Instant::now();
        c.complete_many(&prompts);
        // 50 burst tokens, then 10 more at 50/s.
        assert!(t.elapsed() >= Duration::from_millis(150), "{:?}", t.elapsed());
    }

    #[test]
    fn missing_credential_is_unavailable() {
        let mut r = ClassifierRef::new(BackendKind::External);
        r.endpoint = Some("http://x".into());
        r.model = Some("m".into());
        r.credential_env = Some("DELINEATE_TEST_SURELY_UNSET_KEY".into());
        assert!(matches!(
            ExternalClient::from_ref(&r, Box::new(UreqTransport::new())),
            Err(ClassifyError::Unavailable(_))
        ));
    }
}
