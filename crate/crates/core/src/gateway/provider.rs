//! Backends behind the gateway: a scripted provider for tests and fixture
//! recording, and an HTTP provider for OpenAI-compatible endpoints.

use std::collections::HashMap;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::embed::hashed_embedding;
use super::{CallKind, EmbeddingVector, GatewayError, Prompt, Result};

pub trait Provider: Send + Sync {
    fn complete(&self, prompt: &Prompt) -> Result<String>;
    fn web_search(&self, query: &str) -> Result<String>;
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        Ok(hashed_embedding(text))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reply {
    Text(String),
    /// Report a timeout without waiting.
    Timeout,
    /// Sleep for the given milliseconds, then answer.
    Delay(u64, String),
    Error(String),
}

/// Matches a call when every `when` substring occurs and no `unless`
/// substring does. Completion rules look at the user section only, and at the
/// template id when `template` is set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub kind: CallKind,
    pub template: Option<String>,
    pub when: Vec<String>,
    pub unless: Vec<String>,
    pub reply: Reply,
    /// Fire at most once.
    pub once: bool,
}

impl Rule {
    pub fn complete(when: &[&str], reply: Reply) -> Rule {
        Rule {
            kind: CallKind::Complete,
            template: None,
            when: when.iter().map(|s| s.to_string()).collect(),
            unless: Vec::new(),
            reply,
            once: false,
        }
    }

    pub fn web(when: &[&str], reply: Reply) -> Rule {
        Rule {
            kind: CallKind::Web,
            ..Rule::complete(when, reply)
        }
    }

    pub fn template(mut self, id: &str) -> Rule {
        self.template = Some(id.to_string());
        self
    }

    pub fn unless(mut self, subs: &[&str]) -> Rule {
        self.unless.extend(subs.iter().map(|s| s.to_string()));
        self
    }

    pub fn once(mut self) -> Rule {
        self.once = true;
        self
    }

    fn matches(&self, kind: CallKind, template: Option<&str>, text: &str) -> bool {
        if self.kind != kind {
            return false;
        }
        if let (Some(want), Some(have)) = (&self.template, template) {
            if want != have && !have.starts_with(&format!("{want}@")) {
                return false;
            }
        }
        self.when.iter().all(|w| text.contains(w.as_str())) && !self.unless.iter().any(|u| text.contains(u.as_str()))
    }
}

/// Rule-driven fake model. The first matching rule wins.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    rules: Vec<Rule>,
    spent: Mutex<Vec<bool>>,
}

impl ScriptedProvider {
    pub fn new() -> ScriptedProvider {
        ScriptedProvider::default()
    }

    pub fn rule(mut self, rule: Rule) -> ScriptedProvider {
        self.rules.push(rule);
        self.spent.get_mut().expect("spent lock").push(false);
        self
    }

    fn answer(&self, kind: CallKind, template: Option<&str>, text: &str) -> Result<String> {
        let reply = {
            let mut spent = self.spent.lock().expect("spent lock");
            let hit = self
                .rules
                .iter()
                .enumerate()
                .find(|(i, r)| !(r.once && spent[*i]) && r.matches(kind, template, text));
            match hit {
                Some((i, r)) => {
                    spent[i] = true;
                    r.reply.clone()
                }
                None => return Err(GatewayError::Transport(format!("no scripted reply for: {text}"))),
            }
        };
        match reply {
            Reply::Text(t) => Ok(t),
            Reply::Timeout => Err(GatewayError::Timeout { after_ms: 0 }),
            Reply::Delay(ms, t) => {
                thread::sleep(Duration::from_millis(ms));
                Ok(t)
            }
            Reply::Error(e) => Err(GatewayError::Transport(e)),
        }
    }
}

impl Provider for ScriptedProvider {
    fn complete(&self, prompt: &Prompt) -> Result<String> {
        self.answer(CallKind::Complete, Some(&prompt.template), &prompt.user)
    }

    fn web_search(&self, query: &str) -> Result<String> {
        self.answer(CallKind::Web, None, query)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub base_url: String,
    pub api_key: String,
    pub default_model: String,
    /// Model per pipeline stage, keyed by template name without version.
    pub stage_models: HashMap<String, String>,
    pub embedding_model: String,
    pub search_url: String,
    pub search_key: String,
    pub request_timeout_secs: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            base_url: "https://api.openai.com/v1".into(),
            api_key: String::new(),
            default_model: "gpt-4".into(),
            stage_models: HashMap::from([("refine".to_string(), "gpt-3.5-turbo".to_string())]),
            embedding_model: "text-embedding-3-small".into(),
            search_url: "https://serpapi.com/search.json".into(),
            search_key: String::new(),
            request_timeout_secs: 120,
        }
    }
}

impl HttpConfig {
    pub fn model_for(&self, template: &str) -> &str {
        let stage = template.split('@').next().unwrap_or(template);
        self.stage_models.get(stage).map(String::as_str).unwrap_or(&self.default_model)
    }
}

pub struct HttpProvider {
    config: HttpConfig,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(config: HttpConfig) -> HttpProvider {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.request_timeout_secs)))
            .build()
            .into();
        HttpProvider { config, agent }
    }

    pub fn messages(prompt: &Prompt) -> Vec<Value> {
        let mut system = prompt.system.clone();
        if !prompt.tools.is_empty() {
            system.push_str("\n\nTools:\n");
            for t in &prompt.tools {
                system.push_str(&format!("{}: {}\n", t.name, t.description));
            }
        }
        let mut out = vec![json!({"role": "system", "content": system})];
        for (input, output) in &prompt.few_shot {
            out.push(json!({"role": "user", "content": input}));
            out.push(json!({"role": "assistant", "content": output}));
        }
        out.push(json!({"role": "user", "content": prompt.user}));
        out
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value> {
        let url = format!("{}/{}", self.config.base_url.trim_end_matches('/'), path);
        let mut resp = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {}", self.config.api_key))
            .send_json(body)
            .map_err(transport)?;
        resp.body_mut().read_json::<Value>().map_err(transport)
    }
}

fn transport(e: ureq::Error) -> GatewayError {
    match e {
        ureq::Error::Timeout(_) => GatewayError::Timeout { after_ms: 0 },
        other => GatewayError::Transport(other.to_string()),
    }
}

impl Provider for HttpProvider {
    fn complete(&self, prompt: &Prompt) -> Result<String> {
        let body = json!({
            "model": self.config.model_for(&prompt.template),
            "messages": HttpProvider::messages(prompt),
            "temperature": 0,
        });
        let v = self.post("chat/completions", &body)?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| GatewayError::Transport("response has no message content".into()))
    }

    fn web_search(&self, query: &str) -> Result<String> {
        let mut resp = self
            .agent
            .get(&self.config.search_url)
            .query("q", query)
            .query("api_key", &self.config.search_key)
            .call()
            .map_err(transport)?;
        let v: Value = resp.body_mut().read_json().map_err(transport)?;
        Ok(search_snippets(&v))
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let body = json!({"model": self.config.embedding_model, "input": text});
        let v = self.post("embeddings", &body)?;
        v["data"][0]["embedding"]
            .as_array()
            .map(|a| a.iter().filter_map(Value::as_f64).collect())
            .ok_or_else(|| GatewayError::Transport("response has no embedding".into()))
    }
}

/// Answer box first, then organic snippets, one per line. Empty when the
/// search found nothing.
pub(crate) fn search_snippets(v: &Value) -> String {
    let mut lines = Vec::new();
    for key in ["answer", "snippet"] {
        if let Some(s) = v["answer_box"][key].as_str() {
            lines.push(s.to_string());
        }
    }
    if let Some(results) = v["organic_results"].as_array() {
        lines.extend(results.iter().take(3).filter_map(|r| r["snippet"].as_str()).map(str::to_string));
    }
    lines.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_match_in_order_with_exclusions() {
        let p = ScriptedProvider::new()
            .rule(Rule::complete(&["Haiti"], Reply::Text("nav".into())).unless(&["rate"]))
            .rule(Rule::complete(&["Haiti"], Reply::Text("rate".into())));
        let mk = |u: &str| Prompt::new("classify@v1", "", u);
        assert_eq!(p.complete(&mk("Take me to Haiti")).unwrap(), "nav");
        assert_eq!(p.complete(&mk("Haiti rate")).unwrap(), "rate");
        assert!(p.complete(&mk("Guam")).is_err());
    }

    #[test]
    fn once_rules_fall_through() {
        let p = ScriptedProvider::new()
            .rule(Rule::complete(&["score"], Reply::Text("Score: 7".into())).once())
            .rule(Rule::complete(&["score"], Reply::Text("Score: 4".into())));
        let pr = Prompt::new("judge@v1", "", "score this");
        assert_eq!(p.complete(&pr).unwrap(), "Score: 7");
        assert_eq!(p.complete(&pr).unwrap(), "Score: 4");
    }

    #[test]
    fn template_filter_applies() {
        let p = ScriptedProvider::new()
            .rule(Rule::complete(&["x"], Reply::Text("refined".into())).template("refine"))
            .rule(Rule::complete(&["x"], Reply::Text("other".into())));
        assert_eq!(p.complete(&Prompt::new("refine@v1", "", "x")).unwrap(), "refined");
        assert_eq!(p.complete(&Prompt::new("classify@v1", "", "x")).unwrap(), "other");
    }

    #[test]
    fn stage_models_default_to_refine_split() {
        let c = HttpConfig::default();
        assert_eq!(c.model_for("refine@v1"), "gpt-3.5-turbo");
        assert_eq!(c.model_for("classify@v1"), "gpt-4");
    }

    #[test]
    fn messages_interleave_examples() {
        let mut p = Prompt::new("classify@v1", "sys", "q");
        p.few_shot.push(("in".into(), "out".into()));
        let m = HttpProvider::messages(&p);
        let roles: Vec<&str> = m.iter().map(|v| v["role"].as_str().unwrap()).collect();
        assert_eq!(roles, ["system", "user", "assistant", "user"]);
    }

    #[test]
    fn snippets_prefer_answer_box() {
        let v = json!({"answer_box": {"snippet": "A"}, "organic_results": [{"snippet": "B"}, {"title": "no snippet"}]});
        assert_eq!(search_snippets(&v), "A\nB");
        assert_eq!(search_snippets(&json!({})), "");
    }
}
