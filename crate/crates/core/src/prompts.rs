//! Versioned prompt templates with `{{name}}` placeholders.
//!
//! Each template file has a `=== system ===` section and a `=== user ===`
//! section. The template id (`name@version`) is part of every prompt digest,
//! so editing a template invalidates recorded transcripts that used it.

use crate::gateway::Prompt;

pub const VERSION: &str = "v1";

const TEMPLATES: &[(&str, &str)] = &[
    ("refine", include_str!("../prompts/v1/refine.txt")),
    ("classify", include_str!("../prompts/v1/classify.txt")),
    ("tabular", include_str!("../prompts/v1/tabular.txt")),
    ("contextual", include_str!("../prompts/v1/contextual.txt")),
    ("navigation", include_str!("../prompts/v1/navigation.txt")),
    ("suggest", include_str!("../prompts/v1/suggest.txt")),
    ("cold_start", include_str!("../prompts/v1/cold_start.txt")),
    ("judge", include_str!("../prompts/v1/judge.txt")),
    ("navgen", include_str!("../prompts/v1/navgen.txt")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    TEMPLATES.iter().map(|(n, _)| *n)
}

fn source(name: &str) -> &'static str {
    TEMPLATES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .unwrap_or_else(|| panic!("unknown prompt template `{name}`"))
}

fn split(text: &str) -> (&str, &str) {
    let body = text.strip_prefix("=== system ===\n").expect("template starts with a system section");
    let (system, user) = body.split_once("=== user ===\n").expect("template has a user section");
    (system.trim_end(), user.trim_end())
}

/// Replaces each `{{key}}` with its value. Panics on a placeholder left
/// unfilled, since that is a bug in the caller rather than in the input.
pub fn fill(text: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").expect("unterminated placeholder");
        let key = &after[..end];
        let value = vars
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| panic!("no value for placeholder `{key}`"));
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    out
}

/// Builds the prompt for template `name` with both sections filled.
pub fn render(name: &str, vars: &[(&str, &str)]) -> Prompt {
    let (system, user) = split(source(name));
    Prompt::new(format!("{name}@{VERSION}"), fill(system, vars), fill(user, vars))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn placeholders(text: &str) -> Vec<String> {
        text.split("{{").skip(1).map(|s| s.split("}}").next().unwrap().to_string()).collect()
    }

    #[test]
    fn every_template_parses_and_fills() {
        for name in names() {
            let (system, user) = split(source(name));
            assert!(!system.is_empty() && !user.is_empty(), "{name}");
            let keys: Vec<String> = placeholders(system).into_iter().chain(placeholders(user)).collect();
            let vars: Vec<(&str, &str)> = keys.iter().map(|k| (k.as_str(), "X")).collect();
            let p = render(name, &vars);
            assert!(!p.system.contains("{{") && !p.user.contains("{{"), "{name}");
            assert_eq!(p.template, format!("{name}@v1"));
        }
    }

    #[test]
    fn fill_substitutes_in_order() {
        assert_eq!(fill("a {{x}} b {{y}} {{x}}", &[("x", "1"), ("y", "2")]), "a 1 b 2 1");
    }

    #[test]
    #[should_panic(expected = "no value")]
    fn missing_value_panics() {
        fill("{{x}}", &[]);
    }

    #[test]
    fn judge_prompt_hides_reference_roles() {
        let p = render("judge", &[("question", "q"), ("response_a", "a"), ("response_b", "b")]);
        let text = p.render().to_lowercase();
        for banned in ["ground truth", "ground-truth", "reference answer", "system response", "correct answer"] {
            assert!(!text.contains(banned), "{banned}");
        }
    }
}
