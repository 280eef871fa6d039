//! CSV traces and the run manifest.
//!
//! Floats are written with 9 significant digits in `%.9g` style.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::EngineConfig;
use crate::engine::{record_peak, Engine, EpisodeSummary, StepRecord};
use crate::error::Result;
use crate::field::{ConcentrationField, FieldParams};
use crate::learning::PolicyParams;

pub const VISITATION_BINS: usize = 20;

pub const TRACE_FILES: [&str; 8] = [
    "field.csv",
    "agents.csv",
    "rewards.csv",
    "weights.csv",
    "learning.csv",
    "curriculum.csv",
    "secretion.csv",
    "visitation.csv",
];

pub const MANIFEST: &str = "manifest.txt";

/// `printf("%.9g")` formatting.
pub fn fmt_g9(x: f64) -> String {
    const P: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    let mut out = String::new();
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&fmt_g9(v));
    }
    out
}

struct Trace {
    name: &'static str,
    out: BufWriter<File>,
    rows: usize,
}

impl Trace {
    fn create(dir: &Path, name: &'static str, header: &str) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(dir.join(name))?);
        writeln!(out, "{header}")?;
        Ok(Self { name, out, rows: 0 })
    }

    fn row(&mut self, line: &str) -> io::Result<()> {
        writeln!(self.out, "{line}")?;
        self.rows += 1;
        Ok(())
    }
}

/// Streams step records and episode summaries into the output directory.
pub struct TraceWriter {
    params: FieldParams,
    grid: (f64, f64),
    traces: Vec<Trace>,
    visits: Vec<u64>,
}

const FIELD: usize = 0;
const AGENTS: usize = 1;
const REWARDS: usize = 2;
const WEIGHTS: usize = 3;
const LEARNING: usize = 4;
const CURRICULUM: usize = 5;
const SECRETION: usize = 6;
const VISITATION: usize = 7;

impl TraceWriter {
    pub fn create(dir: &Path, config: &EngineConfig) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        let params = config.field;
        let n = config.agents.count;
        let field_header = format!("time,{}", join(params.positions()));
        let learning_header = format!(
            "episode,mean_reward,policy_entropy,critic_loss,max_q_proxy,{}",
            (0..n).map(|k| format!("action_std_{k}")).collect::<Vec<_>>().join(",")
        );
        let visitation_header = format!(
            "step,{}",
            (0..VISITATION_BINS).map(|b| format!("bin_{b}")).collect::<Vec<_>>().join(",")
        );
        let headers: [(&'static str, String); 8] = [
            (TRACE_FILES[FIELD], field_header),
            (
                TRACE_FILES[AGENTS],
                "step,agent_id,position,a_k,secrete_rate,move_delta,amplify_gain,atp,injury_gradient,\
                 secretion_rate,neural_coherence,oxidative_stress"
                    .into(),
            ),
            (TRACE_FILES[REWARDS], "step,agent_id,r_ext,r_chem,r_sync,r_robust,total".into()),
            (TRACE_FILES[WEIGHTS], "step,mean,std,min,max".into()),
            (TRACE_FILES[LEARNING], learning_header),
            (TRACE_FILES[CURRICULUM], "step,target,x_inj".into()),
            (
                TRACE_FILES[SECRETION],
                "step,time,total_secretion,mean_secretion,peak_position,x_inj".into(),
            ),
            (TRACE_FILES[VISITATION], visitation_header),
        ];
        let traces = headers
            .into_iter()
            .map(|(name, header)| Trace::create(dir, name, &header))
            .collect::<io::Result<Vec<_>>>()?;
        Ok(Self {
            params,
            grid: (params.grid_min, params.grid_max),
            traces,
            visits: vec![0; VISITATION_BINS],
        })
    }

    fn bin(&self, x: f64) -> usize {
        let (lo, hi) = self.grid;
        let b = ((x - lo) / (hi - lo) * VISITATION_BINS as f64).floor();
        (b.max(0.0) as usize).min(VISITATION_BINS - 1)
    }

    pub fn write_step(&mut self, r: &StepRecord) -> Result<()> {
        let step = r.step;
        self.traces[FIELD].row(&format!("{},{}", fmt_g9(r.time), join(r.field.iter().copied())))?;
        for (k, a) in r.agents.iter().enumerate() {
            let h = a.health.as_array();
            let mut line = format!("{step},{k},");
            line.push_str(&join(
                [a.position, a.potential, a.action.secrete_rate, a.action.move_delta, a.action.amplify_gain]
                    .into_iter()
                    .chain(h),
            ));
            self.traces[AGENTS].row(&line)?;
            let rw = &a.reward;
            self.traces[REWARDS].row(&format!(
                "{step},{k},{}",
                join([rw.r_ext, rw.r_chem, rw.r_sync, rw.r_robust, rw.total])
            ))?;
        }
        let w = &r.weights;
        self.traces[WEIGHTS].row(&format!("{step},{}", join([w.mean, w.std, w.min, w.max])))?;
        self.traces[CURRICULUM].row(&format!(
            "{step},{}",
            join([r.curriculum_target, r.injury_position])
        ))?;
        let total = r.total_secretion();
        let mean = total / r.agents.len() as f64;
        let peak = record_peak(r, &self.params)?;
        self.traces[SECRETION].row(&format!(
            "{step},{}",
            join([r.time, total, mean, peak, r.injury_position])
        ))?;
        for a in &r.agents {
            let b = self.bin(a.position);
            self.visits[b] += 1;
        }
        let mut line = step.to_string();
        for v in &self.visits {
            let _ = write!(line, ",{v}");
        }
        self.traces[VISITATION].row(&line)?;
        Ok(())
    }

    pub fn write_episode(&mut self, e: &EpisodeSummary) -> Result<()> {
        let line = format!(
            "{},{}",
            e.episode,
            join([e.mean_reward, e.policy_entropy, e.critic_loss, e.max_q_proxy]
                .into_iter()
                .chain(e.action_std.iter().copied()))
        );
        self.traces[LEARNING].row(&line)?;
        Ok(())
    }

    pub fn row_counts(&self) -> Vec<(&'static str, usize)> {
        self.traces.iter().map(|t| (t.name, t.rows)).collect()
    }

    pub fn flush(&mut self) -> io::Result<()> {
        for t in &mut self.traces {
            t.out.flush()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Complete,
    Partial(String),
}

pub fn write_manifest(
    dir: &Path,
    config: &EngineConfig,
    steps: usize,
    rows: &[(&str, usize)],
    status: &RunStatus,
) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(dir.join(MANIFEST))?);
    writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "seed = {}", config.seed)?;
    writeln!(out, "steps = {steps}")?;
    match status {
        RunStatus::Complete => writeln!(out, "status = complete")?,
        RunStatus::Partial(why) => writeln!(out, "status = partial ({why})")?,
    }
    writeln!(out)?;
    writeln!(out, "[rows]")?;
    for (name, n) in rows {
        writeln!(out, "{name} = {n}")?;
    }
    writeln!(out)?;
    writeln!(out, "[config]")?;
    write!(out, "{}", config.to_toml_string())?;
    out.flush()
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub steps: usize,
    pub rows: Vec<(&'static str, usize)>,
    pub status: RunStatus,
    pub final_field: ConcentrationField,
    pub policies: Vec<PolicyParams>,
}

/// Runs the configuration and writes every trace plus the manifest into `dir`.
///
/// Failures after the directory is set up still leave a manifest marked partial;
/// the error is reported through [`RunArtifacts::status`].
pub fn run_to_dir(config: EngineConfig, dir: &Path) -> Result<RunArtifacts> {
    let mut engine = Engine::new(config.clone())?;
    let mut writer = TraceWriter::create(dir, &config)?;
    let outcome = (|| -> Result<()> {
        while !engine.is_finished() {
            let o = engine.step()?;
            writer.write_step(&o.record)?;
            if let Some(e) = &o.episode {
                writer.write_episode(e)?;
            }
        }
        writer.flush()?;
        Ok(())
    })();
    let status = match &outcome {
        Ok(()) => RunStatus::Complete,
        Err(e) => RunStatus::Partial(e.to_string()),
    };
    let _ = writer.flush();
    let rows = writer.row_counts();
    let steps = engine.step_index();
    write_manifest(dir, &config, steps, &rows, &status)?;
    Ok(RunArtifacts {
        dir: dir.to_path_buf(),
        steps,
        rows,
        status,
        final_field: engine.field().clone(),
        policies: engine.policies(),
    })
}
