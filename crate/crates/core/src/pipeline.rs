//! Staged run: solve → segment → rays → obstacle → classify → flatness →
//! report, writing fields, tables and a report into one directory and a
//! digest manifest last.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::field::ScalarField;
use crate::freeboundary::{
    analyze_free_boundary, attach_flatness, singular_isolation_report, singular_axis_check, BlowupMode,
    FreeBoundaryRecord, IsolationReport, PointClass,
};
use crate::geometry::Grid;
use crate::io::{format_field, format_labels, sha256_hex};
use crate::numeric::quantile;
use crate::obstacle::{build_gap, compare_u1_laplacian, minimal_convex_extension, FanWindow, GapSolution, LaplacianComparison};
use crate::rays::{build_tame_fan, fan_identities, select_tame_arc, FanIdentityReport, RayFan};
use crate::regions::{hessian_field, region_diagnostics, segment_regions, RegionDiagnostics, RegionLabelField};
use crate::solver::{solve_on_grid, SolveReport};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Solve,
    Segment,
    Rays,
    Obstacle,
    Classify,
    Flatness,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Solve,
        Stage::Segment,
        Stage::Rays,
        Stage::Obstacle,
        Stage::Classify,
        Stage::Flatness,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Solve => "solve",
            Stage::Segment => "segment",
            Stage::Rays => "rays",
            Stage::Obstacle => "obstacle",
            Stage::Classify => "classify",
            Stage::Flatness => "flatness",
            Stage::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|st| st.name() == s.trim())
    }

    fn prerequisite(self) -> Option<Stage> {
        match self {
            Stage::Solve | Stage::Report => None,
            Stage::Segment => Some(Stage::Solve),
            Stage::Rays => Some(Stage::Segment),
            Stage::Obstacle => Some(Stage::Rays),
            Stage::Classify => Some(Stage::Obstacle),
            Stage::Flatness => Some(Stage::Classify),
        }
    }

    /// Requested stages closed under prerequisites, in pipeline order.
    pub fn closure(requested: &[Stage]) -> Vec<Stage> {
        let mut set = std::collections::BTreeSet::new();
        for &s in requested {
            let mut cur = Some(s);
            while let Some(c) = cur {
                set.insert(c);
                cur = c.prerequisite();
            }
        }
        set.into_iter().collect()
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("output {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            _ => 3,
        }
    }
}

/// In-memory stage results.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub u: Option<ScalarField>,
    pub solve: Option<SolveReport>,
    pub labels: Option<RegionLabelField>,
    pub regions: Option<RegionDiagnostics>,
    pub arc: Option<Range<usize>>,
    pub fan: Option<RayFan>,
    pub identities: Option<FanIdentityReport>,
    pub window: Option<FanWindow>,
    pub u1: Option<ScalarField>,
    pub gap: Option<GapSolution>,
    pub laplacian: Option<LaplacianComparison>,
    pub records: Option<Vec<FreeBoundaryRecord>>,
    pub isolation: Option<IsolationReport>,
    pub flatness_radii: Option<Vec<f64>>,
    pub report: Option<Report>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputDigest {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridInfo {
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub origin: [f64; 2],
    pub inside_nodes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub status: &'static str,
    pub failed_stage: Option<&'static str>,
    pub error: Option<String>,
    pub stages: Vec<&'static str>,
    pub threads: usize,
    pub config: Config,
    pub grid: Option<GridInfo>,
    pub tolerances: BTreeMap<&'static str, f64>,
    pub timings: Vec<StageTiming>,
    pub outputs: Vec<OutputDigest>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub artifacts: Artifacts,
    pub manifest: RunManifest,
}

/// Every file name a run can produce; stale copies are removed up front.
const OUTPUT_FILES: [&str; 14] = [
    "u.field",
    "objective_trace.csv",
    "labels.field",
    "fan.csv",
    "fan_identities.csv",
    "u1.field",
    "v.field",
    "free_boundary.csv",
    "records.json",
    "density.csv",
    "flatness.csv",
    "singular.csv",
    "report.json",
    MANIFEST,
];

struct Writer {
    dir: PathBuf,
    written: Vec<String>,
}

impl Writer {
    fn put(&mut self, name: &str, contents: &str) -> Result<(), PipelineError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|source| PipelineError::Io { path, source })?;
        self.written.push(name.to_string());
        Ok(())
    }
}

fn stage_err(stage: Stage, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Stage {
        stage: stage.name(),
        message: e.to_string(),
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Runs `stages` (closed under prerequisites) into `out_dir`. On a stage
/// failure the manifest is still written, marking the failed stage.
pub fn run_pipeline(cfg: &Config, stages: &[Stage], out_dir: &Path) -> Result<RunOutcome, PipelineError> {
    cfg.validate()?;
    let stages = Stage::closure(stages);
    std::fs::create_dir_all(out_dir).map_err(|source| PipelineError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    for name in OUTPUT_FILES {
        let p = out_dir.join(name);
        if p.exists() {
            std::fs::remove_file(&p).map_err(|source| PipelineError::Io { path: p, source })?;
        }
    }
    let mut w = Writer {
        dir: out_dir.to_path_buf(),
        written: Vec::new(),
    };
    let mut art = Artifacts::default();
    let mut timings = Vec::new();
    let mut failure: Option<(Stage, PipelineError)> = None;
    for &stage in &stages {
        let start = Instant::now();
        let res = run_stage(stage, cfg, &mut art, &mut w);
        timings.push(StageTiming {
            stage: stage.name(),
            seconds: start.elapsed().as_secs_f64(),
        });
        if let Err(e) = res {
            failure = Some((stage, e));
            break;
        }
    }
    let manifest = write_manifest(cfg, &stages, &art, timings, failure.as_ref(), &w)?;
    match failure {
        Some((_, e)) => Err(e),
        None => Ok(RunOutcome {
            artifacts: art,
            manifest,
        }),
    }
}

fn write_manifest(
    cfg: &Config,
    stages: &[Stage],
    art: &Artifacts,
    timings: Vec<StageTiming>,
    failure: Option<&(Stage, PipelineError)>,
    w: &Writer,
) -> Result<RunManifest, PipelineError> {
    let mut names = w.written.clone();
    names.sort();
    names.dedup();
    let mut outputs = Vec::new();
    for name in names {
        let path = w.dir.join(&name);
        let bytes = std::fs::read(&path).map_err(|source| PipelineError::Io { path, source })?;
        outputs.push(OutputDigest {
            file: name,
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
    }
    let h = cfg.grid.h;
    let (u_tol, lambda_tol) = cfg.tolerances();
    let fan = cfg.fan_config();
    let tolerances = BTreeMap::from([
        ("kkt_tol", cfg.solver.kkt_tol),
        ("feas_tol", cfg.solver.feas_tol),
        ("u_tol", u_tol),
        ("lambda_tol", lambda_tol),
        ("affine_tol", fan.affine_tol),
        ("min_distortion", fan.min_distortion),
        ("contact_tol", h * h),
        ("reg_band", 0.15),
        ("sing_band", 0.15),
    ]);
    let grid = art.u.as_ref().map(|u| grid_info(&u.grid));
    let manifest = RunManifest {
        tool: "screenfb",
        version: env!("CARGO_PKG_VERSION"),
        status: if failure.is_some() { "failed" } else { "complete" },
        failed_stage: failure.map(|(s, _)| s.name()),
        error: failure.map(|(_, e)| e.to_string()),
        stages: stages.iter().map(|s| s.name()).collect(),
        threads: rayon::current_num_threads(),
        config: cfg.clone(),
        grid,
        tolerances,
        timings,
        outputs,
    };
    let path = w.dir.join(MANIFEST);
    std::fs::write(&path, json(&manifest)).map_err(|source| PipelineError::Io { path, source })?;
    Ok(manifest)
}

fn grid_info(g: &Grid) -> GridInfo {
    GridInfo {
        h: g.h,
        nx: g.nx,
        ny: g.ny,
        origin: g.origin,
        inside_nodes: g.inside_count(),
    }
}

fn run_stage(stage: Stage, cfg: &Config, art: &mut Artifacts, w: &mut Writer) -> Result<(), PipelineError> {
    let missing = |what: &str| stage_err(stage, format!("missing {what}"));
    match stage {
        Stage::Solve => {
            let poly = cfg.polygon()?;
            let grid = Arc::new(Grid::build(&poly, cfg.grid.h).map_err(|e| stage_err(stage, e))?);
            let (u, rep) = solve_on_grid(grid, &cfg.cone()?, &cfg.solver).map_err(|e| stage_err(stage, e))?;
            w.put("u.field", &format_field(&u, "u"))?;
            let mut t = String::from("iteration,objective\n");
            for (k, v) in rep.objective_trace.iter().enumerate() {
                let _ = writeln!(t, "{k},{v}");
            }
            w.put("objective_trace.csv", &t)?;
            art.u = Some(u);
            art.solve = Some(rep);
        }
        Stage::Segment => {
            let u = art.u.as_ref().ok_or_else(|| missing("solution"))?;
            let (u_tol, lambda_tol) = cfg.tolerances();
            let hess = hessian_field(u);
            let labels = segment_regions(u, &hess, u_tol, lambda_tol);
            let chart = u.grid.boundary_chart().map_err(|e| stage_err(stage, e))?;
            art.regions = Some(region_diagnostics(u, &labels, &chart));
            w.put("labels.field", &format_labels(&labels))?;
            art.labels = Some(labels);
        }
        Stage::Rays => {
            let u = art.u.as_ref().ok_or_else(|| missing("solution"))?;
            let labels = art.labels.as_ref().ok_or_else(|| missing("labels"))?;
            let hess = hessian_field(u);
            let chart = u.grid.boundary_chart().map_err(|e| stage_err(stage, e))?;
            let fcfg = cfg.fan_config();
            let (arc, fan) = match cfg.rays.arc {
                Some([a, b]) => {
                    if b > chart.len() {
                        return Err(stage_err(stage, format!("arc end {b} exceeds {} chart samples", chart.len())));
                    }
                    let fan = build_tame_fan(u, &hess, labels, &chart, a..b, &fcfg).map_err(|e| stage_err(stage, e))?;
                    (a..b, fan)
                }
                None => select_tame_arc(u, &hess, labels, &chart, &fcfg).map_err(|e| stage_err(stage, e))?,
            };
            let ids = fan_identities(&fan).map_err(|e| stage_err(stage, e))?;
            w.put("fan.csv", &fan.to_table())?;
            let mut t = String::from("t,ray_length_residual\n");
            for (a, b) in ids.t.iter().zip(&ids.ray_length_residual) {
                let _ = writeln!(t, "{a},{b}");
            }
            w.put("fan_identities.csv", &t)?;
            art.arc = Some(arc);
            art.fan = Some(fan);
            art.identities = Some(ids);
        }
        Stage::Obstacle => {
            let u = art.u.as_ref().ok_or_else(|| missing("solution"))?;
            let labels = art.labels.as_ref().ok_or_else(|| missing("labels"))?;
            let fan = art.fan.as_ref().ok_or_else(|| missing("fan"))?;
            let window = FanWindow::auto(fan, labels).map_err(|e| stage_err(stage, e))?;
            let u1 = minimal_convex_extension(&window).map_err(|e| stage_err(stage, e))?;
            let lap = compare_u1_laplacian(&window, &u1).map_err(|e| stage_err(stage, e))?;
            let gap = build_gap(u, labels, &window).map_err(|e| stage_err(stage, e))?;
            w.put("u1.field", &format_field(&u1, "u1"))?;
            w.put("v.field", &format_field(&gap.v, "v"))?;
            let mut t = String::from("x,y\n");
            for p in &gap.partition.free_boundary {
                let _ = writeln!(t, "{},{}", p[0], p[1]);
            }
            w.put("free_boundary.csv", &t)?;
            art.window = Some(window);
            art.u1 = Some(u1);
            art.laplacian = Some(lap);
            art.gap = Some(gap);
        }
        Stage::Classify => {
            let gap = art.gap.as_ref().ok_or_else(|| missing("gap"))?;
            let window = art.window.as_ref().ok_or_else(|| missing("window"))?;
            let records = analyze_free_boundary(gap, window);
            let iso = singular_isolation_report(&records, art.fan.as_ref());
            write_records(w, &records)?;
            let mut t = String::from("point,x,y,radius,ratio\n");
            for (k, r) in records.iter().enumerate() {
                if let Some(d) = &r.density {
                    for (rad, rho) in d.radii.iter().zip(&d.ratios) {
                        let _ = writeln!(t, "{k},{},{},{rad},{rho}", r.point[0], r.point[1]);
                    }
                }
            }
            w.put("density.csv", &t)?;
            let mut t = String::from("x,y,t,at_local_max_of_length\n");
            for c in &iso.candidates {
                let tt = c.t.map_or(String::from("NA"), |v| v.to_string());
                let _ = writeln!(t, "{},{},{tt},{}", c.point[0], c.point[1], c.at_local_max_of_length);
            }
            w.put("singular.csv", &t)?;
            art.records = Some(records);
            art.isolation = Some(iso);
        }
        Stage::Flatness => {
            let gap = art.gap.as_ref().ok_or_else(|| missing("gap"))?;
            let records = art.records.as_mut().ok_or_else(|| missing("records"))?;
            let h = cfg.grid.h;
            let radii = vec![32.0 * h, 16.0 * h, 8.0 * h];
            attach_flatness(records, &gap.partition.free_boundary, &radii);
            write_records(w, records)?;
            let mut t = String::from("point,x,y,class,radius,theta\n");
            for (k, r) in records.iter().enumerate() {
                if let Some(f) = &r.flatness {
                    for (rad, th) in f.radii.iter().zip(&f.theta) {
                        let _ = writeln!(t, "{k},{},{},{:?},{rad},{th}", r.point[0], r.point[1], r.class);
                    }
                }
            }
            w.put("flatness.csv", &t)?;
            art.flatness_radii = Some(radii);
        }
        Stage::Report => {
            let report = build_report(cfg, art);
            w.put("report.json", &json(&report))?;
            art.report = Some(report);
        }
    }
    Ok(())
}

fn write_records(w: &mut Writer, records: &[FreeBoundaryRecord]) -> Result<(), PipelineError> {
    w.put("records.json", &json(&records))
}

/// `Some(x)` for finite `x`, so the report never carries NaN or infinities.
fn fin(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Debug, Clone, Serialize)]
pub struct Quantiles {
    pub count: usize,
    pub median: Option<f64>,
    pub p90: Option<f64>,
    pub max: Option<f64>,
}

impl Quantiles {
    fn of(xs: &[f64]) -> Self {
        Self {
            count: xs.len(),
            median: quantile(xs, 0.5).and_then(fin),
            p90: quantile(xs, 0.9).and_then(fin),
            max: quantile(xs, 1.0).and_then(fin),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverSection {
    pub nodes: usize,
    pub cone_directions: usize,
    pub iterations: usize,
    pub objective: Option<f64>,
    pub kkt_residual: Option<f64>,
    pub feasibility_residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionsSection {
    pub u_tol: f64,
    pub lambda_tol: f64,
    pub area_exclusion: f64,
    pub area_bunching: f64,
    pub area_customization: f64,
    pub laplacian_defect: Option<Quantiles>,
    pub exclusion_convexity_defect: Option<f64>,
    pub min_boundary_distortion: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FanSection {
    pub arc_start: usize,
    pub arc_end: usize,
    pub samples: usize,
    pub r0: Option<f64>,
    pub eta0: Option<f64>,
    pub r_max: Option<f64>,
    pub ray_length_residual: Quantiles,
    pub min_separation: Option<f64>,
    pub min_orientation: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObstacleSection {
    pub window_r_lo: Option<f64>,
    pub window_r_hi: Option<f64>,
    pub window_nodes: usize,
    pub contact_nodes: usize,
    pub noncontact_nodes: usize,
    pub free_boundary_points: usize,
    pub raw_min_v: Option<f64>,
    pub min_v: Option<f64>,
    pub max_abs_v_bunching: Option<f64>,
    pub bunching_nodes: usize,
    pub c0_est: Option<f64>,
    pub c0_samples: usize,
    pub v_nonnegative: bool,
    pub contact_on_bunching: bool,
    pub positive_laplacian: bool,
    pub reduction_failed: bool,
    pub laplacian_formula_samples: usize,
    pub laplacian_formula_median_deviation: Option<f64>,
    pub laplacian_formula_p90_deviation: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationSection {
    pub points: usize,
    pub regular: usize,
    pub singular: usize,
    pub undetermined: usize,
    pub blowup_fits: usize,
    pub blowup_regular: usize,
    pub blowup_singular: usize,
    pub singular_min_separation: Option<f64>,
    pub singular_at_length_maximum: usize,
    pub singular_axis_deviation_max: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlatnessRow {
    pub radius: f64,
    pub radius_in_h: f64,
    pub regular: Quantiles,
    pub all: Quantiles,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlatnessSection {
    pub rows: Vec<FlatnessRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub solver: Option<SolverSection>,
    pub regions: Option<RegionsSection>,
    pub fan: Option<FanSection>,
    pub obstacle: Option<ObstacleSection>,
    pub classification: Option<ClassificationSection>,
    pub flatness: Option<FlatnessSection>,
}

pub fn build_report(cfg: &Config, art: &Artifacts) -> Report {
    let solver = art.solve.as_ref().zip(art.u.as_ref()).map(|(s, u)| SolverSection {
        nodes: u.grid.inside_count(),
        cone_directions: cfg.cone.directions,
        iterations: s.iterations,
        objective: s.objective_trace.last().copied().and_then(fin),
        kkt_residual: fin(s.kkt_residual),
        feasibility_residual: fin(s.feasibility_residual),
    });
    let regions = art.regions.as_ref().zip(art.labels.as_ref()).map(|(d, l)| RegionsSection {
        u_tol: l.u_tol,
        lambda_tol: l.lambda_tol,
        area_exclusion: d.area_exclusion,
        area_bunching: d.area_bunching,
        area_customization: d.area_customization,
        laplacian_defect: d.laplacian_defect.as_ref().map(|s| Quantiles {
            count: s.count,
            median: fin(s.median),
            p90: fin(s.p90),
            max: fin(s.max),
        }),
        exclusion_convexity_defect: d.exclusion_convexity_defect.and_then(fin),
        min_boundary_distortion: d.min_boundary_distortion.and_then(fin),
    });
    let fan = match (&art.fan, &art.identities, &art.arc) {
        (Some(f), Some(ids), Some(arc)) => Some(FanSection {
            arc_start: arc.start,
            arc_end: arc.end,
            samples: f.len(),
            r0: fin(f.r0),
            eta0: fin(f.eta0),
            r_max: fin(f.r_max),
            ray_length_residual: Quantiles::of(&ids.ray_length_residual),
            min_separation: fin(ids.min_separation),
            min_orientation: fin(ids.min_orientation),
        }),
        _ => None,
    };
    let obstacle = art.gap.as_ref().map(|g| {
        let rep = g.report.as_ref();
        let lap = art.laplacian.as_ref();
        ObstacleSection {
            window_r_lo: art.window.as_ref().and_then(|w| fin(w.r_lo)),
            window_r_hi: art.window.as_ref().and_then(|w| fin(w.r_hi)),
            window_nodes: art.window.as_ref().map_or(0, |w| w.node_count()),
            contact_nodes: g.partition.contact.len(),
            noncontact_nodes: g.partition.noncontact.len(),
            free_boundary_points: g.partition.free_boundary.len(),
            raw_min_v: rep.and_then(|r| fin(r.raw_min_v)),
            min_v: rep.and_then(|r| fin(r.min_v)),
            max_abs_v_bunching: rep.and_then(|r| fin(r.max_abs_v_bunching)),
            bunching_nodes: rep.map_or(0, |r| r.bunching_nodes),
            c0_est: rep.and_then(|r| fin(r.c0_est)),
            c0_samples: rep.map_or(0, |r| r.c0_samples),
            v_nonnegative: rep.is_some_and(|r| r.v_nonnegative),
            contact_on_bunching: rep.is_some_and(|r| r.contact_on_bunching),
            positive_laplacian: rep.is_some_and(|r| r.positive_laplacian),
            reduction_failed: rep.is_none_or(|r| r.reduction_failed),
            laplacian_formula_samples: lap.map_or(0, |l| l.samples),
            laplacian_formula_median_deviation: lap.and_then(|l| fin(l.median_relative_deviation)),
            laplacian_formula_p90_deviation: lap.and_then(|l| fin(l.p90_relative_deviation)),
        }
    });
    let classification = art.records.as_ref().map(|recs| {
        let count = |c: PointClass| recs.iter().filter(|r| r.class == c).count();
        let fits: Vec<_> = recs.iter().filter_map(|r| r.blowup.as_ref()).collect();
        let axis: Vec<f64> = recs
            .iter()
            .filter(|r| r.class == PointClass::Singular)
            .filter_map(|r| {
                let fit = r.blowup.as_ref()?;
                singular_axis_check(fit, r.xi?).ok()
            })
            .collect();
        let iso = art.isolation.as_ref();
        ClassificationSection {
            points: recs.len(),
            regular: count(PointClass::Regular),
            singular: count(PointClass::Singular),
            undetermined: count(PointClass::Undetermined),
            blowup_fits: fits.len(),
            blowup_regular: fits.iter().filter(|f| f.mode == BlowupMode::Regular).count(),
            blowup_singular: fits.iter().filter(|f| f.mode == BlowupMode::Singular).count(),
            singular_min_separation: iso.and_then(|i| i.min_separation).and_then(fin),
            singular_at_length_maximum: iso.map_or(0, |i| i.candidates.iter().filter(|c| c.at_local_max_of_length).count()),
            singular_axis_deviation_max: axis.iter().copied().reduce(f64::max).and_then(fin),
        }
    });
    let flatness = match (&art.records, &art.flatness_radii) {
        (Some(recs), Some(radii)) => Some(FlatnessSection {
            rows: radii
                .iter()
                .enumerate()
                .map(|(k, &r)| {
                    let at = |only_regular: bool| -> Vec<f64> {
                        recs.iter()
                            .filter(|rec| !only_regular || rec.class == PointClass::Regular)
                            .filter_map(|rec| rec.flatness.as_ref().map(|f| f.theta[k]))
                            .collect()
                    };
                    FlatnessRow {
                        radius: r,
                        radius_in_h: r / cfg.grid.h,
                        regular: Quantiles::of(&at(true)),
                        all: Quantiles::of(&at(false)),
                    }
                })
                .collect(),
        }),
        _ => None,
    };
    Report {
        solver,
        regions,
        fan,
        obstacle,
        classification,
        flatness,
    }
}
