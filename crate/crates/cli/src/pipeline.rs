//! The full run: metric, Rips filtration, cocycle, persistence, classes and
//! their decorations, written to one output directory together with a
//! manifest that replays the run via `--config`.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use approxbundle::bundle::{consistency_radius, witness, write_cocycle, DiscreteCocycle};
use approxbundle::charclass::{write_class_csv, ClassKind};
use approxbundle::complex::{vr_filtration, write_filtration, Filtration};
use approxbundle::ingest::{alignment_cocycle, local_pca, maxmin_subsample, random_subsample, DissimilarityMatrix};
use approxbundle::persistence::{persistent_cohomology, write_diagram_csv, PersistenceDiagram};
use approxbundle::pipeline::{analyze_class, class_degree, class_regime, persistence_filtration, required_prime, ClassReport};
use clap::{Args, ValueEnum};

use crate::commands::{load_metric, write_decoration, write_defects, Metric};
use crate::error::{CliError, CliResult};
use crate::{io, MetricInput, SubsampleMethod};

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ClassName {
    Sw1,
    Sw2,
    Euler,
}

impl ClassName {
    fn kind(self) -> ClassKind {
        match self {
            ClassName::Sw1 => ClassKind::Sw1,
            ClassName::Sw2 => ClassKind::Sw2,
            ClassName::Euler => ClassKind::Euler,
        }
    }

    fn label(self) -> &'static str {
        match self {
            ClassName::Sw1 => "sw1",
            ClassName::Sw2 => "sw2",
            ClassName::Euler => "euler",
        }
    }
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub input: MetricInput,
    /// Precomputed filtration; use with --cocycle instead of a metric input.
    #[arg(long, requires = "cocycle")]
    pub filtration: Option<PathBuf>,
    #[arg(long, requires = "filtration")]
    pub cocycle: Option<PathBuf>,
    /// Classes to compute, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    pub class: Vec<ClassName>,
    /// Keep this many points before building the complex.
    #[arg(long)]
    pub subsample: Option<usize>,
    #[arg(long, value_enum, default_value_t = SubsampleMethod::Maxmin)]
    pub subsample_method: SubsampleMethod,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, conflicts_with = "threshold_quantile")]
    pub threshold: Option<f64>,
    /// Threshold as a quantile of the pairwise dissimilarities.
    #[arg(long)]
    pub threshold_quantile: Option<f64>,
    /// Largest simplex dimension; one above the highest class degree by
    /// default.
    #[arg(long)]
    pub max_dim: Option<usize>,
    /// Neighborhood size for local PCA.
    #[arg(long, default_value_t = 18)]
    pub k: usize,
    #[arg(long, default_value_t = 2)]
    pub rank: usize,
    /// Coefficient prime for the Euler class; Stiefel-Whitney classes always
    /// use 2.
    #[arg(long, default_value_t = 3)]
    pub prime: u32,
    #[arg(long, default_value_t = 2.0)]
    pub eps_sw1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps_sw2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps_euler: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

impl PipelineArgs {
    fn eps(&self, c: ClassName) -> f64 {
        match c {
            ClassName::Sw1 => self.eps_sw1,
            ClassName::Sw2 => self.eps_sw2,
            ClassName::Euler => self.eps_euler,
        }
    }

    /// Flag values as `key=value` lines, in the config-file format.
    fn manifest(&self, threshold: f64, max_dim: usize) -> String {
        let mut m: BTreeMap<&str, String> = BTreeMap::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        for (k, v) in [
            ("points", path(&self.input.points)),
            ("dissimilarity", path(&self.input.dissimilarity)),
            ("images", path(&self.input.images)),
            ("rotations", path(&self.input.rotations)),
            ("filtration", path(&self.filtration)),
            ("cocycle", path(&self.cocycle)),
            ("subsample", self.subsample.map(|s| s.to_string())),
        ] {
            if let Some(v) = v {
                m.insert(k, v);
            }
        }
        let classes: Vec<&str> = self.class.iter().map(|c| c.label()).collect();
        m.insert("class", classes.join(","));
        let method = match self.subsample_method {
            SubsampleMethod::Maxmin => "maxmin",
            SubsampleMethod::Random => "random",
        };
        m.insert("subsample-method", method.into());
        m.insert("seed", self.seed.to_string());
        if self.filtration.is_none() {
            m.insert("threshold", threshold.to_string());
            m.insert("max-dim", max_dim.to_string());
        }
        m.insert("k", self.k.to_string());
        m.insert("rank", self.rank.to_string());
        m.insert("prime", self.prime.to_string());
        m.insert("eps-sw1", self.eps_sw1.to_string());
        m.insert("eps-sw2", self.eps_sw2.to_string());
        m.insert("eps-euler", self.eps_euler.to_string());
        m.insert("out-dir", self.out_dir.display().to_string());
        let mut s = format!("# approxbundle {} pipeline\n", env!("CARGO_PKG_VERSION"));
        for (k, v) in m {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }
}

/// Exclusive claim on the output directory, released on drop.
struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(".lock");
        OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| CliError::io(&path, e))?;
        Ok(DirLock(path))
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn check_regimes(a: &PipelineArgs) -> CliResult<()> {
    for &c in &a.class {
        let (eps, max) = (a.eps(c), class_regime(c.kind()));
        if !(eps > 0.0 && eps <= max) {
            return Err(approxbundle::Error::Regime(format!("eps-{} = {eps} outside 0 < eps <= {max}", c.label())).into());
        }
    }
    if a.class.contains(&ClassName::Euler) && a.rank != 2 && a.input.rotations.is_none() {
        return Err(approxbundle::Error::Regime(format!("the Euler class needs rank 2, got {}", a.rank)).into());
    }
    Ok(())
}

fn quantile(d: &DissimilarityMatrix, q: f64) -> CliResult<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(CliError::Usage(format!("threshold quantile {q} outside [0, 1]")));
    }
    let m = d.as_matrix();
    let n = d.len();
    let mut all: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| m[(i, j)])).collect();
    if all.is_empty() {
        return Err(approxbundle::Error::Degenerate("fewer than two points".into()).into());
    }
    all.sort_by(f64::total_cmp);
    Ok(all[((all.len() - 1) as f64 * q) as usize])
}

fn subsample(metric: Metric, a: &PipelineArgs) -> Metric {
    let Some(m) = a.subsample else {
        return metric;
    };
    let idx = match a.subsample_method {
        SubsampleMethod::Maxmin => maxmin_subsample(&metric.dissimilarity, m),
        SubsampleMethod::Random => random_subsample(metric.dissimilarity.len(), m, a.seed),
    };
    Metric {
        dissimilarity: metric.dissimilarity.select(&idx),
        points: metric.points.map(|x| x.select(&idx)),
        rotations: metric.rotations.map(|r| idx.iter().map(|&i| r[i]).collect()),
    }
}

/// Filtration and cocycle, built from data or read from files.
fn build(a: &PipelineArgs, max_dim: usize) -> CliResult<(Arc<Filtration>, DiscreteCocycle, f64)> {
    if let (Some(fp), Some(cp)) = (&a.filtration, &a.cocycle) {
        let f = io::filtration(fp)?;
        let omega = io::cocycle(cp, &f)?;
        let t = f.threshold();
        return Ok((f, omega, t));
    }
    let metric = subsample(load_metric(&a.input)?, a);
    let threshold = match (a.threshold, a.threshold_quantile) {
        (Some(t), _) => t,
        (None, Some(q)) => quantile(&metric.dissimilarity, q)?,
        (None, None) => return Err(CliError::Usage("give --threshold or --threshold-quantile".into())),
    };
    let f = Arc::new(vr_filtration(metric.dissimilarity.as_matrix(), max_dim, threshold)?);
    let omega = match (&metric.rotations, &metric.points) {
        (Some(rots), _) => alignment_cocycle(rots, f.complex().clone())?,
        (None, Some(x)) => {
            let pca = local_pca(x, a.k, a.rank)?;
            if !pca.degenerate.is_empty() {
                log::warn!("{} points have a degenerate neighborhood", pca.degenerate.len());
            }
            witness(&pca.trivialization(f.complex().clone())?)?
        }
        (None, None) => {
            return Err(CliError::Usage("a dissimilarity matrix alone does not determine a cocycle".into()));
        }
    };
    Ok((f, omega, threshold))
}

fn write_file<F>(dir: &Path, name: &str, body: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    io::write_to(Some(&dir.join(name)), body)
}

fn summary_lines(c: ClassName, r: &ClassReport, diag: &PersistenceDiagram) -> String {
    let ids = |v: &[usize]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
    let mp = r.most_persistent.and_then(|b| diag.bar(b));
    let l = c.label();
    let mut s = String::new();
    s.push_str(&format!("{l}.eps={}\n", r.eps));
    s.push_str(&format!("{l}.death={}\n", r.death));
    s.push_str(&format!("{l}.scale={}\n", r.scale.map_or("none".into(), |x| x.to_string())));
    s.push_str(&format!("{l}.span={}\n", ids(&r.span)));
    s.push_str(&format!("{l}.decorated={}\n", ids(&r.decorated())));
    s.push_str(&format!("{l}.nonzero={}\n", r.is_nonzero()));
    s.push_str(&format!("{l}.most_persistent={}\n", mp.map_or("none".into(), |b| b.id.to_string())));
    s.push_str(&format!("{l}.most_persistent_decorated={}\n", r.most_persistent_decorated()));
    s
}

pub fn run(a: PipelineArgs) -> CliResult<()> {
    check_regimes(&a)?;
    let top_degree = a.class.iter().map(|c| class_degree(c.kind())).max().unwrap_or(1);
    let max_dim = a.max_dim.unwrap_or(top_degree + 1);
    let _lock = DirLock::acquire(&a.out_dir)?;
    let (f, omega, threshold) = build(&a, max_dim)?;
    let dir = a.out_dir.as_path();
    write_file(dir, "filtration.txt", |w| write_filtration(&f, w))?;
    write_file(dir, "cocycle.txt", |w| write_cocycle(&omega, w))?;
    write_file(dir, "defects.csv", |w| write_defects(&omega, &f, w))?;

    let mut summary = format!("vertices={}\nradius={}\n", f.complex().n_vertices(), consistency_radius(&omega));
    let mut diagrams: BTreeMap<u32, PersistenceDiagram> = BTreeMap::new();
    let mut empty = Vec::new();
    let mut classes = a.class.clone();
    classes.sort();
    classes.dedup();
    for c in classes {
        let p = required_prime(c.kind(), a.prime);
        if !diagrams.contains_key(&p) {
            let diag = persistent_cohomology(persistence_filtration(&f, top_degree), p, top_degree)?;
            write_file(dir, &format!("diagram-z{p}.csv"), |w| write_diagram_csv(&diag, w))?;
            diagrams.insert(p, diag);
        }
        let diag = &diagrams[&p];
        let report = analyze_class(diag, &omega, c.kind(), a.eps(c))?;
        summary.push_str(&summary_lines(c, &report, diag));
        if let Some(z) = &report.class {
            write_file(dir, &format!("class-{}.csv", c.label()), |w| write_class_csv(z, w))?;
        }
        if let Some(dec) = &report.decomposition {
            write_file(dir, &format!("decomposition-{}.csv", c.label()), |w| write_decoration(diag, dec, w))?;
        }
        if report.scale.is_none() {
            empty.push(c.label());
        }
    }
    write_file(dir, "summary.txt", |w| w.write_all(summary.as_bytes()))?;
    write_file(dir, "manifest.txt", |w| w.write_all(a.manifest(threshold, max_dim).as_bytes()))?;
    if !empty.is_empty() {
        return Err(CliError::EmptySpan(format!(
            "{} violated at the first filtration value",
            empty.join(", ")
        )));
    }
    Ok(())
}
