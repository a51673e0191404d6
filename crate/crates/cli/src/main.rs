use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use emr_regimens::pipeline::{run_all, run_stage, RunConfig, Stage};
use serde_json::Value;

/// Learn group-level treatment regimens from patient records and prescriptions.
#[derive(Parser)]
#[command(name = "emr-regimens", version)]
struct Cli {
    /// Run configuration (JSON). Flags override its values.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate a synthetic cohort, prescriptions and drug knowledge base.
    Synth,
    /// Split the cohort, encode features and train the MV.RBM.
    Train,
    /// Compute binary hidden codes for training and test patients.
    Encode,
    /// Cluster training codes; write the dendrogram and assignment.
    Cluster,
    /// Classify drugs and score every prescription history.
    Score,
    /// Split every history into treatment periods.
    Split,
    /// Build a regimen tree per (cluster, period).
    Trees,
    /// Recommend drug sets for test patients.
    Recommend,
    /// Score recommendations and print the report.
    Evaluate,
    /// Run train through evaluate.
    RunAll,
}

impl Command {
    fn stage(self) -> Option<Stage> {
        Some(match self {
            Command::Synth => Stage::Synth,
            Command::Train => Stage::Train,
            Command::Encode => Stage::Encode,
            Command::Cluster => Stage::Cluster,
            Command::Score => Stage::Score,
            Command::Split => Stage::Split,
            Command::Trees => Stage::Trees,
            Command::Recommend => Stage::Recommend,
            Command::Evaluate => Stage::Evaluate,
            Command::RunAll => return None,
        })
    }
}

macro_rules! overrides {
    ($($field:ident : $ty:ty = $name:literal, $help:literal;)*) => {
        #[derive(Args, Default)]
        struct Overrides {
            $(
                #[arg(long = $name, help = $help, global = true, value_name = "VALUE")]
                $field: Option<$ty>,
            )*
        }

        impl Overrides {
            fn pairs(&self) -> Vec<(&'static str, Value)> {
                let mut out = Vec::new();
                $(
                    if let Some(v) = &self.$field {
                        out.push(($name, serde_json::to_value(v).expect("flag value serialises")));
                    }
                )*
                out
            }
        }
    };
}

overrides! {
    seed: u64 = "seed", "Seed for every random choice";
    cohort: PathBuf = "cohort", "Cohort file (JSON, or CSV with a .csv extension)";
    symptoms: PathBuf = "symptoms", "Symptom sidecar for CSV cohorts";
    lexicon: String = "lexicon", "Comma-separated symptom phrases matched in note text";
    prescriptions: PathBuf = "prescriptions", "Prescriptions CSV";
    drug_kb: PathBuf = "drug_kb", "Drug indication knowledge base (TSV)";
    output_dir: PathBuf = "output_dir", "Directory for every artifact";
    disease_name: String = "disease.disease_name", "Target disease name";
    disease_symptoms: String = "disease.symptoms", "Comma-separated symptom phrases of the disease";
    hidden_units: usize = "train.hidden_units", "Hidden units K";
    cd_steps: usize = "train.cd_steps", "Gibbs steps per CD update";
    learning_rate: f64 = "train.learning_rate", "Learning rate";
    epochs: usize = "train.epochs", "Training epochs";
    batch_size: usize = "train.batch_size", "Minibatch size";
    weight_decay: f64 = "train.weight_decay", "L2 penalty on weights";
    momentum: f64 = "train.momentum", "Momentum";
    early_stop: bool = "train.early_stop", "Stop when the reconstruction error plateaus";
    clusters: usize = "clusters", "Number of patient clusters";
    periods: usize = "periods", "Treatment periods per history";
    w_main: f64 = "weights.w_main", "Score weight of main drugs";
    w_symp: f64 = "weights.w_symp", "Score weight of symptom-healing drugs";
    w_unk: f64 = "weights.w_unk", "Score weight of unclassified drugs";
    max_depth: usize = "tree.max_depth", "Regimen tree depth limit";
    threshold: usize = "tree.threshold", "Minimum patients per tree node";
    test_count: usize = "test_count", "Held-out test patients";
    synth_groups: usize = "synth.n_groups", "Synthetic patient groups";
    synth_patients: usize = "synth.n_patients", "Synthetic patients";
    synth_numeric: usize = "synth.n_numeric", "Synthetic numeric features";
    synth_binary: usize = "synth.n_binary", "Synthetic binary features";
    synth_categorical: usize = "synth.n_categorical", "Synthetic categorical features";
    synth_cardinality: usize = "synth.cardinality", "Categories per categorical feature";
    synth_symptoms: usize = "synth.n_symptoms", "Synthetic symptom features";
    synth_separation: f64 = "synth.separation", "Group separation in [0, 1]";
    synth_periods: usize = "synth.n_periods", "Synthetic treatment periods (replaced by --periods)";
    synth_planted: usize = "synth.planted_per_period", "Planted drugs per group and period";
    synth_main: usize = "synth.main_per_period", "Main drugs among the planted ones";
    synth_delivery: f64 = "synth.delivery_prob", "Delivery probability of planted drugs";
    synth_noise_pool: usize = "synth.noise_pool", "Number of noise drugs";
    synth_noise_prob: f64 = "synth.noise_prob", "Probability of each noise drug per period";
    synth_min_days: u64 = "synth.min_period_days", "Shortest synthetic period";
    synth_max_days: u64 = "synth.max_period_days", "Longest synthetic period";
    synth_start: String = "synth.start_date", "Earliest synthetic date (YYYY-MM-DD)";
}

const LIST_FIELDS: [&str; 2] = ["lexicon", "disease.symptoms"];

fn set_dotted(doc: &mut Value, dotted: &str, value: Value) {
    let mut node = doc;
    let mut parts = dotted.split('.').peekable();
    while let Some(key) = parts.next() {
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        let map = node.as_object_mut().expect("object");
        if parts.peek().is_none() {
            map.insert(key.to_string(), value);
            return;
        }
        node = map.entry(key).or_insert_with(|| Value::Object(Default::default()));
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, String> {
    let mut doc = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))?
        }
        None => Value::Object(Default::default()),
    };
    for (name, mut value) in cli.overrides.pairs() {
        if LIST_FIELDS.contains(&name) {
            let items: Vec<Value> = value
                .as_str()
                .unwrap_or_default()
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| Value::String(s.to_string()))
                .collect();
            value = Value::Array(items);
        }
        set_dotted(&mut doc, name, value);
    }
    if doc.get("seed").is_none() {
        return Err("a seed is required: set `seed` in the config or pass --seed".into());
    }
    serde_json::from_value(doc).map_err(|e| format!("invalid configuration: {e}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| writeln!(buf, "{}: {}", record.level().as_str().to_lowercase(), record.args()))
        .init();
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: [config] {msg}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command.stage() {
        Some(stage) => run_stage(stage, &cfg).map(|out| (stage, out)),
        None => run_all(&cfg).map(|out| (Stage::Evaluate, out)),
    };
    match result {
        Ok((Stage::Evaluate, table)) => {
            print!("{table}");
            ExitCode::SUCCESS
        }
        Ok((stage, summary)) => {
            log::info!("[{stage}] {summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_paths_nest() {
        let mut doc = serde_json::json!({"train": {"epochs": 3}});
        set_dotted(&mut doc, "train.hidden_units", 7.into());
        set_dotted(&mut doc, "seed", 1.into());
        assert_eq!(doc, serde_json::json!({"train": {"epochs": 3, "hidden_units": 7}, "seed": 1}));
    }

    #[test]
    fn cli_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
