use std::fmt::Write;

use chrono::{Days, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::PipelineConfig;
use crate::rng::rng_for;

/// Schema, preprocessing and variants for the synthetic wearable table.
pub const DEMO_CONFIG: &str = r#"entity_column = "id"
timestamp_column = "date"
normalization = "zscore"

[[features]]
name = "steps"
category = "physical_activity"
kind = "numeric"
native_granularity = "daily"
description = "steps walked per day"
aggregation = "sum"
granularity_fill = "daily"
missing_policy = "mean"

[[features]]
name = "sedentary_minutes"
category = "physical_activity"
kind = "numeric"
native_granularity = "daily"
description = "minutes spent sitting or inactive"
aggregation = "sum"
granularity_fill = "daily"
missing_policy = "mean"

[[features]]
name = "sleep_minutes"
category = "sleep"
kind = "numeric"
native_granularity = "daily"
description = "minutes asleep"
aggregation = "sum"
granularity_fill = "daily"
missing_policy = "mean"

[[features]]
name = "sleep_efficiency"
category = "sleep"
kind = "numeric"
native_granularity = "daily"
description = "share of time in bed spent asleep, in percent"
aggregation = "mean"
granularity_fill = "daily"
missing_policy = "mean"

[[features]]
name = "resting_hr"
category = "health"
kind = "numeric"
native_granularity = "daily"
description = "resting heart rate in beats per minute"
aggregation = "mean"
granularity_fill = "daily"
missing_policy = "mean"

[[features]]
name = "screen_minutes"
category = "behavior"
kind = "numeric"
native_granularity = "daily"
description = "minutes of phone screen time"
aggregation = "sum"
granularity_fill = "daily"
missing_policy = "mean"

[[features]]
name = "gender"
category = "demographics"
kind = "categorical"
native_granularity = "entry"
levels = ["female", "male"]
description = "self-reported gender"
aggregation = "last"
granularity_fill = "forward"
missing_policy = "mode"
encoding = "one_hot"

[[features]]
name = "mood"
category = "mental_health"
kind = "numeric"
native_granularity = "daily"
role = "validation"
description = "self-reported mood from 1 (low) to 5 (high)"
aggregation = "mean"
granularity_fill = "daily"
missing_policy = "mean"

[[features]]
name = "stress_score"
category = "mental_health"
kind = "numeric"
native_granularity = "daily"
role = "validation"
description = "daily stress score from 0 to 100"
aggregation = "mean"
granularity_fill = "daily"
missing_policy = "mean"

[[variants]]
name = "full"
granularity = "hourly"

[[variants]]
name = "categories"
granularity = "hourly"
categories = ["physical_activity", "sleep", "health"]

[[variants]]
name = "clean"
granularity = "hourly"
features = ["steps", "sedentary_minutes", "sleep_minutes", "resting_hr"]

[[variants]]
name = "full"
granularity = "daily"

[[variants]]
name = "categories"
granularity = "daily"
categories = ["physical_activity", "sleep", "health"]

[[variants]]
name = "clean"
granularity = "daily"
features = ["steps", "sedentary_minutes", "sleep_minutes", "resting_hr"]
"#;

pub const DEMO_PREAMBLE: &str = "The records are daily summaries from consumer wearables and short \
phone surveys. Physical activity, sleep and heart-rate features describe behaviour; mood and stress \
are self-reported well-being measures that were not used for clustering.";

pub fn demo_config() -> PipelineConfig {
    PipelineConfig::from_toml_str(DEMO_CONFIG).expect("demo config is valid")
}

/// Shape of the synthetic table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoShape {
    pub entities: usize,
    pub days: usize,
    /// Probability that a numeric cell is left empty.
    pub missing_rate: f64,
    /// Number of day records with inflated activity values.
    pub outliers: usize,
}

impl Default for DemoShape {
    fn default() -> Self {
        Self {
            entities: 20,
            days: 20,
            missing_rate: 0.02,
            outliers: 6,
        }
    }
}

/// Per-group mean and spread of each numeric column, low then high well-being.
const PROFILES: [(&str, f64, f64, f64); 8] = [
    ("steps", 4000.0, 11000.0, 900.0),
    ("sedentary_minutes", 800.0, 520.0, 45.0),
    ("sleep_minutes", 360.0, 460.0, 22.0),
    ("sleep_efficiency", 82.0, 93.0, 1.6),
    ("resting_hr", 72.0, 60.0, 2.2),
    ("screen_minutes", 300.0, 150.0, 25.0),
    ("mood", 2.3, 4.0, 0.4),
    ("stress_score", 70.0, 40.0, 6.0),
];

/// A two-group daily table: one row per entity and day, entities alternating
/// between a low and a high well-being profile.
pub fn generate_demo_csv(seed: u64, shape: DemoShape) -> String {
    let mut rng = rng_for(seed, "demo-data");
    let start = NaiveDate::from_ymd_opt(2024, 3, 1).expect("valid date");
    let mut out = String::from("id,date");
    for (name, ..) in PROFILES {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",gender\n");
    let n = shape.entities * shape.days;
    let outlier_rows: Vec<usize> = rand::seq::index::sample(&mut rng, n, shape.outliers.min(n)).into_vec();
    for e in 0..shape.entities {
        let group = e % 2;
        let gender = if (e / 2) % 2 == 0 { "female" } else { "male" };
        for d in 0..shape.days {
            let row = e * shape.days + d;
            let date = start.checked_add_days(Days::new(d as u64)).expect("date in range");
            write!(out, "u{:02},{}", e + 1, date.format("%Y-%m-%d")).unwrap();
            for (j, (_, low, high, sd)) in PROFILES.iter().enumerate() {
                let mean = if group == 0 { *low } else { *high };
                let mut v = Normal::new(mean, *sd).expect("positive sd").sample(&mut rng);
                if j == 0 && outlier_rows.contains(&row) {
                    v *= 2.5;
                }
                if rng.random::<f64>() < shape.missing_rate {
                    out.push(',');
                } else {
                    write!(out, ",{}", (v * 100.0).round() / 100.0).unwrap();
                }
            }
            writeln!(out, ",{gender}").unwrap();
        }
    }
    out
}
