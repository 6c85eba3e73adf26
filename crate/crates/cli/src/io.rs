//! Output artifacts: CSV and JSON writers. Every file embeds the config
//! hash it was produced under.

use ring_rc_core::integrator::TraceSample;
use ring_rc_core::readout::ReadoutModel;
use ring_rc_core::tasks::TaskDataset;
use ring_rc_core::tdrc::StateMatrix;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub fn write_trace_csv(path: &Path, trace: &[TraceSample], hash: &str) -> std::io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "# config_sha256={hash}")?;
    writeln!(f, "t_s,re_a,im_a,deltaN_m3,deltaT_K,p_drop_W")?;
    for s in trace {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            s.t_s, s.state.amplitude.re, s.state.amplitude.im, s.state.delta_n, s.state.delta_t, s.p_drop_w
        )?;
    }
    f.flush()
}

pub fn write_state_matrix_csv(path: &Path, states: &StateMatrix, hash: &str) -> std::io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "# config_sha256={hash}")?;
    let header: Vec<String> = (0..states.cols()).map(|j| format!("node_{j}")).collect();
    writeln!(f, "{}", header.join(","))?;
    for r in 0..states.rows() {
        let row: Vec<String> = states.row(r).iter().map(|v| v.to_string()).collect();
        writeln!(f, "{}", row.join(","))?;
    }
    f.flush()
}

pub fn write_dataset_csv(path: &Path, dataset: &TaskDataset, hash: &str) -> std::io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "# config_sha256={hash}")?;
    writeln!(f, "k,u,y")?;
    for (k, (u, y)) in dataset.inputs.iter().zip(&dataset.targets).enumerate() {
        writeln!(f, "{k},{u},{y}")?;
    }
    f.flush()
}

#[derive(Serialize)]
struct ModelDump<'a> {
    config_sha256: &'a str,
    lambda: f64,
    weights: &'a [f64],
}

pub fn write_model_json(path: &Path, model: &ReadoutModel, hash: &str) -> std::io::Result<()> {
    let dump = ModelDump {
        config_sha256: hash,
        lambda: model.lambda,
        weights: &model.weights,
    };
    std::fs::write(path, serde_json::to_string_pretty(&dump).expect("model serializes"))
}

/// Single-run scores. Deliberately excludes wall-clock timing so repeated
/// runs with the same seed are byte-identical.
#[derive(Debug, Serialize)]
pub struct Metrics {
    pub config_sha256: String,
    pub detuning_ghz: f64,
    pub pin_dbm: f64,
    pub tau_fc_s: f64,
    pub tau_th_s: f64,
    pub seed: u64,
    pub n_nodes: usize,
    pub warmup_symbols: usize,
    pub train_symbols: usize,
    pub test_symbols: usize,
    pub lambda: f64,
    pub train_nmse: f64,
    pub test_nmse: f64,
    pub modulation_index: f64,
}

pub fn write_metrics_json(path: &Path, metrics: &Metrics) -> std::io::Result<()> {
    std::fs::write(
        path,
        serde_json::to_string_pretty(metrics).expect("metrics serialize"),
    )
}
