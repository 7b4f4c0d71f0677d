//! One function per subcommand; each returns the rendered report and the
//! process exit code.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use gascert_core::connective::{analyze, small_gain_network};
use gascert_core::riccati::certify_gas;
use gascert_core::sim::{metrics, Metrics, Simulator};
use gascert_core::{Mode, SimTrace, Verdict};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Loaded;
use crate::report::{fmt_f64, Method, Report};
use crate::{CliError, EXIT_DIVERGED, EXIT_FAILED, EXIT_OK};

pub struct Outcome {
    pub report: String,
    pub exit_code: i32,
}

fn verdict_exit(v: Verdict) -> i32 {
    if v.passed() {
        EXIT_OK
    } else {
        EXIT_FAILED
    }
}

fn finish<T: Serialize>(loaded: &Loaded, method: Method, verdict: Verdict, exit_code: i32, body: T) -> Outcome {
    Outcome {
        report: Report::new(loaded, method, verdict, exit_code, body).to_json(),
        exit_code,
    }
}

pub fn connective(loaded: &Loaded) -> Result<Outcome, CliError> {
    let r = analyze(&loaded.network)?;
    let v = r.verdict;
    Ok(finish(loaded, Method::Connective, v, verdict_exit(v), r))
}

pub fn riccati(loaded: &Loaded, tol: Option<f64>, strict: bool) -> Result<Outcome, CliError> {
    let opts = loaded.certify_options(tol, strict)?;
    let cert = certify_gas(&loaded.network, &opts)?;
    let v = cert.verdict;
    Ok(finish(loaded, Method::Riccati, v, verdict_exit(v), cert))
}

pub fn small_gain(loaded: &Loaded) -> Result<Outcome, CliError> {
    let r = small_gain_network(&loaded.network)?;
    let v = r.verdict;
    Ok(finish(loaded, Method::SmallGain, v, verdict_exit(v), r))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub mode: Mode,
    pub certified: bool,
    pub horizon: f64,
    pub dt: f64,
    pub samples: usize,
    pub diverged: bool,
    pub diverged_at: Option<f64>,
    /// Hex SHA-256 of the CSV trace.
    pub trace_sha256: String,
    pub metrics: Metrics,
}

pub fn simulate(loaded: &Loaded, mode: Mode, tol: Option<f64>, strict: bool, out: &Path) -> Result<Outcome, CliError> {
    let scenario = loaded.scenario()?;
    let opts = loaded.certify_options(tol, strict)?;
    let trace = Simulator::new(&loaded.network, scenario, mode, &opts)?.run()?;
    let file = File::create(out).map_err(|source| CliError::Io {
        path: out.display().to_string(),
        source,
    })?;
    let mut sink = HashingWriter {
        inner: BufWriter::new(file),
        hasher: Sha256::new(),
    };
    write_trace_csv(&trace, &mut sink)?;
    sink.inner.flush().map_err(|source| CliError::Io {
        path: out.display().to_string(),
        source,
    })?;
    let summary = SimulationSummary {
        mode,
        certified: trace.certified,
        horizon: scenario.horizon,
        dt: scenario.dt,
        samples: trace.len(),
        diverged: trace.diverged,
        diverged_at: trace.diverged_at,
        trace_sha256: hex::encode(sink.hasher.finalize()),
        metrics: metrics(&trace),
    };
    let (verdict, code) = if trace.diverged {
        (Verdict::Fail, EXIT_DIVERGED)
    } else {
        (Verdict::Pass, EXIT_OK)
    };
    Ok(finish(loaded, Method::Simulate, verdict, code, summary))
}

struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Long-format trace: `time,subsystem,series,index,value`, one row per
/// sample element, plus `global,V` rows for the Lyapunov value.
pub fn write_trace_csv<W: Write>(trace: &SimTrace, w: W) -> Result<(), CliError> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["time", "subsystem", "series", "index", "value"])?;
    for (k, &t) in trace.time.iter().enumerate() {
        let time = fmt_f64(t);
        for nt in &trace.nodes {
            let series: [(&str, &[f64]); 8] = [
                ("x_bar", &nt.x_bar[k]),
                ("x_hat", &nt.x_hat[k]),
                ("theta_hat", &nt.theta_hat[k]),
                ("u_bl", &nt.u_bl[k]),
                ("u_mrac", &nt.u_mrac[k]),
                ("x_tilde_norm", std::slice::from_ref(&nt.x_tilde_norm[k])),
                ("y", &nt.y[k]),
                ("reference", &nt.reference[k]),
            ];
            for (name, values) in series {
                for (i, &v) in values.iter().enumerate() {
                    csv.write_record([time.as_str(), &nt.id, name, &i.to_string(), &fmt_f64(v)])?;
                }
            }
        }
        csv.write_record([time.as_str(), "global", "V", "0", &fmt_f64(trace.v[k])])?;
    }
    csv.flush().map_err(csv::Error::from)?;
    Ok(())
}
