use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{LlmError, Result, Sign};
use crate::data::Dataset;
use crate::explain::FeatureImportanceVector;
use crate::rng::rng_for;
use crate::thesaurus::{Exemplar, Thesaurus};

pub const DEFAULT_FEW_SHOTS: usize = 3;

/// Number of worked examples placed in the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ShotMode {
    Zero,
    One,
    Few { k: usize },
}

impl ShotMode {
    pub fn few() -> Self {
        ShotMode::Few { k: DEFAULT_FEW_SHOTS }
    }

    pub fn n_shots(self) -> usize {
        match self {
            ShotMode::Zero => 0,
            ShotMode::One => 1,
            ShotMode::Few { k } => k,
        }
    }

    /// Technique name as reported in quality tables.
    pub fn technique(self) -> &'static str {
        match self {
            ShotMode::Zero => "zero-shot",
            ShotMode::One => "one-shot",
            ShotMode::Few { .. } => "few-shot",
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            ShotMode::Few { k } if k < 2 => Err(LlmError::InvalidConfig(format!("few-shot needs k >= 2, got {k}"))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ShotMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShotMode::Zero => f.write_str("zero"),
            ShotMode::One => f.write_str("one"),
            ShotMode::Few { k } => write!(f, "few:{k}"),
        }
    }
}

impl FromStr for ShotMode {
    type Err = LlmError;

    /// Accepts `zero`, `one`, `few` and `few:<k>`.
    fn from_str(s: &str) -> Result<Self> {
        let mode = match s.trim().to_ascii_lowercase().as_str() {
            "zero" | "zero-shot" => ShotMode::Zero,
            "one" | "one-shot" => ShotMode::One,
            "few" | "few-shot" => ShotMode::few(),
            other => {
                let k = other
                    .strip_prefix("few:")
                    .and_then(|k| k.parse().ok())
                    .ok_or_else(|| LlmError::InvalidConfig(format!("unknown shot mode {s:?}")))?;
                ShotMode::Few { k }
            }
        };
        match mode {
            ShotMode::Few { k } if !(2..=10).contains(&k) => {
                Err(LlmError::InvalidConfig(format!("few-shot k must be within 2..=10, got {k}")))
            }
            _ => Ok(mode),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: usize,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// First retry delay; doubles on every further retry.
    pub backoff_ms: u64,
    pub backend: BackendKind,
    /// Environment variable holding the bearer token.
    pub api_key_env: Option<String>,
    /// Concurrent in-flight requests for batches.
    pub concurrency: usize,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "http://localhost:8000/v1".into(),
            model_name: "stub".into(),
            temperature: 0.0,
            max_tokens: 512,
            timeout_secs: 60.0,
            max_retries: 3,
            backoff_ms: 250,
            backend: BackendKind::Stub,
            api_key_env: None,
            concurrency: 4,
        }
    }
}

impl LlmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LlmError::InvalidConfig(m));
        if !(self.temperature >= 0.0) {
            return bad(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if !(self.timeout_secs > 0.0) {
            return bad(format!("timeout must be positive, got {}", self.timeout_secs));
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be positive".into());
        }
        if self.concurrency == 0 {
            return bad("concurrency must be at least 1".into());
        }
        if self.backend == BackendKind::Http && self.endpoint_url.trim().is_empty() {
            return bad("http backend needs an endpoint_url".into());
        }
        Ok(())
    }
}

/// One worked example: an exemplar rendered as input and expected answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shot {
    pub exemplar_id: String,
    pub cluster_label: String,
    pub input: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub instance_id: String,
    pub cluster: i32,
    pub cluster_label: String,
    pub mode: ShotMode,
    pub seed: u64,
    pub system_text: String,
    pub shots: Vec<Shot>,
    pub user_text: String,
    /// Character count / 4; an estimate, not a tokenizer count.
    pub token_estimate: usize,
}

impl PromptBundle {
    /// The text of the single user message: worked examples, then the instance.
    pub fn user_message(&self) -> String {
        if self.shots.is_empty() {
            return self.user_text.clone();
        }
        let mut out = String::from("Worked examples:\n\n");
        for (i, s) in self.shots.iter().enumerate() {
            out.push_str(&format!("Example {}\n{}\n{}\n\n", i + 1, s.input, s.answer));
        }
        out.push_str("Now explain the following record.\n\n");
        out.push_str(&self.user_text);
        out
    }

    /// `(role, content)` chat messages.
    pub fn messages(&self) -> Vec<(&'static str, String)> {
        vec![("system", self.system_text.clone()), ("user", self.user_message())]
    }
}

pub const OUTPUT_CONTRACT: &str = "\
Answer in exactly two sections.
The first line is \"RANKING:\" followed by one line per feature, most influential first, \
formatted \"<rank>. <feature_name>: <+|->\" where + means the feature pushes the record towards \
its assigned group and - means it pushes away from it. Use the feature names exactly as given.
Then a line \"EXPLANATION:\" followed by a short plain-language explanation for a non-expert reader.";

fn system_text(t: &Thesaurus) -> String {
    let mut s = String::from(
        "You explain why a clustering model assigned a record to a group. \
         Your answer serves two audiences: experts read the feature ranking, non-experts read the explanation.\n\n",
    );
    if !t.preamble.trim().is_empty() {
        s.push_str("Domain:\n");
        s.push_str(t.preamble.trim());
        s.push_str("\n\n");
    }
    s.push_str(&format!(
        "Groups ({} via {}):\n",
        t.variant,
        t.clustering.algorithm.as_str()
    ));
    let p = &t.profile;
    for (c, label) in t.cluster_labels.iter().enumerate() {
        let size = p.cluster_sizes.get(c).copied().unwrap_or(0);
        s.push_str(&format!("- {label}: {size} records"));
        let sig: Vec<String> = p
            .features
            .iter()
            .filter(|f| f.significant)
            .filter_map(|f| f.means.get(c).map(|m| format!("{} mean {}", f.feature, round4(*m))))
            .collect();
        if !sig.is_empty() {
            s.push_str(&format!("; {}", sig.join(", ")));
        }
        s.push('\n');
    }
    s.push_str("\nFeatures:\n");
    for name in t.feature_names() {
        match t.glossary.get(&name) {
            Some(d) => s.push_str(&format!("- {name}: {d}\n")),
            None => s.push_str(&format!("- {name}\n")),
        }
    }
    s.push_str("\nOutput format:\n");
    s.push_str(OUTPUT_CONTRACT);
    s
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// An instance in original units with its group.
pub fn render_instance(id: &str, features: &[(String, f64)], cluster_label: &str) -> String {
    let mut s = format!("Record {id}\nAssigned group: {cluster_label}\nFeatures:\n");
    for (name, v) in features {
        s.push_str(&format!("- {name} = {v}\n"));
    }
    s
}

/// Features ordered by absolute weight, with the weight's sign.
pub fn ranking_of(fiv: &FeatureImportanceVector) -> Vec<(String, Sign)> {
    fiv.ranked().into_iter().map(|(n, w)| (n, Sign::of(w))).collect()
}

pub fn render_ranking(ranking: &[(String, Sign)]) -> String {
    let mut s = String::from("RANKING:\n");
    for (i, (name, sign)) in ranking.iter().enumerate() {
        s.push_str(&format!("{}. {}: {}\n", i + 1, name, sign.as_char()));
    }
    s
}

fn narrative(ranking: &[(String, Sign)], cluster_label: &str, describe: impl Fn(&str) -> String) -> String {
    let phrase = |(name, sign): &(String, Sign)| {
        let d = describe(name);
        match sign {
            Sign::Plus => format!("{d} pulls it towards this group"),
            Sign::Minus => format!("{d} pulls it away from this group"),
        }
    };
    let mut s = format!("This record belongs to the group \"{cluster_label}\".");
    if let Some(first) = ranking.first() {
        s.push_str(&format!(" The strongest factor is that {}.", phrase(first)));
    }
    let rest: Vec<String> = ranking.iter().skip(1).take(2).map(phrase).collect();
    if !rest.is_empty() {
        s.push_str(&format!(" It is followed by the fact that {}.", rest.join(" and that ")));
    }
    s
}

/// The contracted answer: a ranking block then a narrative.
pub fn render_answer(
    ranking: &[(String, Sign)],
    cluster_label: &str,
    glossary: &std::collections::BTreeMap<String, String>,
) -> String {
    let describe = |n: &str| match glossary.get(n) {
        Some(d) => format!("{d} ({n})"),
        None => n.to_string(),
    };
    format!(
        "{}EXPLANATION:\n{}\n",
        render_ranking(ranking),
        narrative(ranking, cluster_label, describe)
    )
}

fn render_shot(t: &Thesaurus, e: &Exemplar) -> Shot {
    Shot {
        exemplar_id: e.instance_id.clone(),
        cluster_label: e.cluster_label.clone(),
        input: render_instance(&e.instance_id, &e.features, &e.cluster_label),
        answer: render_answer(&ranking_of(&e.explanation), &e.cluster_label, &t.glossary),
    }
}

/// Builds the prompt for one dataset row. Shots are drawn without replacement
/// from the exemplar bank, never including the instance itself.
pub fn build_prompt(t: &Thesaurus, ds: &Dataset, instance_id: &str, mode: ShotMode, seed: u64) -> Result<PromptBundle> {
    t.verify(ds)?;
    mode.validate()?;
    let row = ds
        .row_index(instance_id)
        .ok_or_else(|| LlmError::UnknownInstance(instance_id.to_string()))?;
    let z = ds.values.row(row).to_vec();
    let x = Array2::from_shape_vec((1, z.len()), z.clone()).expect("row shape");
    let cluster = t
        .surrogate
        .model
        .predict(x.view())
        .map_err(|e| LlmError::InvalidConfig(e.to_string()))?[0];
    let cluster_label = t.label_of(cluster);
    let original = t.normalization.denormalize_row(&z);
    let features: Vec<(String, f64)> = t.feature_names().into_iter().zip(original).collect();

    let pool: Vec<&Exemplar> = t.exemplars.iter().filter(|e| e.instance_id != instance_id).collect();
    let k = mode.n_shots();
    if k > pool.len() {
        return Err(LlmError::BankTooSmall {
            requested: k,
            available: pool.len(),
        });
    }
    let mut rng = rng_for(seed, &format!("shots/{instance_id}"));
    let shots: Vec<Shot> = if k == 0 {
        Vec::new()
    } else {
        sample(&mut rng, pool.len(), k).into_iter().map(|i| render_shot(t, pool[i])).collect()
    };

    let mut bundle = PromptBundle {
        instance_id: instance_id.to_string(),
        cluster,
        cluster_label: cluster_label.clone(),
        mode,
        seed,
        system_text: system_text(t),
        shots,
        user_text: render_instance(instance_id, &features, &cluster_label),
        token_estimate: 0,
    };
    let chars: usize = bundle.messages().iter().map(|(_, c)| c.chars().count()).sum();
    bundle.token_estimate = chars.div_ceil(4);
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thesaurus::bundle_fixture;

    #[test]
    fn shot_counts_follow_mode() {
        let (t, ds) = bundle_fixture(20, 5);
        let id = ds.row_id(40);
        let zero = build_prompt(&t, &ds, &id, ShotMode::Zero, 1).unwrap();
        let one = build_prompt(&t, &ds, &id, ShotMode::One, 1).unwrap();
        let few = build_prompt(&t, &ds, &id, ShotMode::few(), 1).unwrap();
        assert_eq!((zero.shots.len(), one.shots.len(), few.shots.len()), (0, 1, 3));
        assert!(!zero.system_text.is_empty() && !zero.user_text.is_empty());
        assert!(zero.token_estimate < one.token_estimate && one.token_estimate < few.token_estimate);
        assert_eq!(few, build_prompt(&t, &ds, &id, ShotMode::few(), 1).unwrap());
        assert!(matches!(
            build_prompt(&t, &ds, &id, ShotMode::Few { k: 25 }, 1),
            Err(LlmError::BankTooSmall { requested: 25, available: 20 })
        ));
    }

    #[test]
    fn bank_too_small() {
        let (t, ds) = bundle_fixture(4, 5);
        let id = ds.row_id(40);
        assert!(matches!(
            build_prompt(&t, &ds, &id, ShotMode::Few { k: 5 }, 1),
            Err(LlmError::BankTooSmall { requested: 5, available: 4 })
        ));
        let own = ds.row_id(0);
        assert!(matches!(
            build_prompt(&t, &ds, &own, ShotMode::Few { k: 4 }, 1),
            Err(LlmError::BankTooSmall { requested: 4, available: 3 })
        ));
    }

    #[test]
    fn instance_values_appear_verbatim() {
        let (t, ds) = bundle_fixture(3, 6);
        let id = ds.row_id(7);
        let b = build_prompt(&t, &ds, &id, ShotMode::One, 0).unwrap();
        let orig = t.normalization.denormalize_row(&ds.values.row(7).to_vec());
        for (name, v) in t.feature_names().iter().zip(orig) {
            assert!(b.user_text.contains(&format!("{name} = {v}")));
        }
        assert!(b.shots.iter().all(|s| s.exemplar_id != id));
        assert!(b.system_text.contains("RANKING:"));
    }

    #[test]
    fn parse_shot_modes() {
        assert_eq!("few:4".parse::<ShotMode>().unwrap(), ShotMode::Few { k: 4 });
        assert_eq!("zero".parse::<ShotMode>().unwrap(), ShotMode::Zero);
        assert!("few:1".parse::<ShotMode>().is_err());
        assert!("few:11".parse::<ShotMode>().is_err());
        assert!("many".parse::<ShotMode>().is_err());
    }
}
