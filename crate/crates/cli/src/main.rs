//! `lrp`: command-line harness for the long-range percolation toolkit.
//!
//! Every option can also come from a `--config` file using the same key
//! (dashes as underscores); flags win. The resolved configuration is written
//! next to the outputs as `config.txt`, so `lrp <cmd> --config config.txt`
//! replays a run.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use statrs::distribution::{ContinuousCDF, Gamma};
use lrp_core::continuum::{sample_continuum_edges, EdgeSample, Window};
use lrp_core::distance::{restricted_distance_k, sample_restricted_distance, PathResult};
use lrp_core::figures::{arc_panel, profile_figure, render_arc_diagram, render_distance_profile};
use lrp_core::io::{self, CsvTable};
use lrp_core::lattice::{bfs_distance, sample_lattice_graph};
use lrp_core::manifest::{Config, RunManifest};
use lrp_core::randomization::{fixed_point_samples, w_truncation};
use lrp_core::scaling::{
    b_hat_trend, c_sweep_grid, default_tail_n, delta_regression, estimate_l, phi_grid, phi_profile, run_ladder,
    tail_check, DistanceKind, LadderConfig, LADDER_W_TOL,
};
use lrp_core::stats::{ks_critical_two_sample, ks_two_sample};
use lrp_core::{norm_dist, Budget, Error, ModelParams, Norm, SeedSpec};

#[derive(Parser)]
#[command(name = "lrp", version, about = "Long-range percolation distances: samplers, estimators, figures")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Flat `key = value` config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    /// Decay exponent; some commands accept it repeatedly.
    #[arg(long)]
    s: Vec<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// l1, l2 or linf.
    #[arg(long)]
    norm: Option<String>,
    #[arg(long = "seed")]
    master_seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; affects wall-clock only.
    #[arg(long)]
    threads: Option<usize>,
    /// Refuse samples whose expected size exceeds this many items.
    #[arg(long)]
    budget: Option<f64>,
    /// Omit timestamps from figures.
    #[arg(long)]
    repro: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample long edges of a box of Z^d and optionally its BFS distance field.
    SampleLattice {
        #[arg(long)]
        side: Option<usize>,
        /// Also write distances from the origin.
        #[arg(long)]
        distance_field: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Sample continuum edges inside a ball.
    SampleContinuum {
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        center: Option<String>,
        #[arg(long)]
        ell_min: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// One restricted-distance query.
    Dist {
        #[arg(long, allow_hyphen_values = true)]
        x: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        y: Option<String>,
        /// Edge sample in JSON Lines; without it the sample is empty.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Sample a fresh window instead of reading edges.
        #[arg(long)]
        sample: bool,
        /// Inflation level of the admissibility ball.
        #[arg(long)]
        k: Option<u32>,
        #[command(flatten)]
        common: Common,
    },
    /// Scaling ladder 2^{-n} D(0, r^{gamma^{-n}} W).
    Ladder {
        #[command(flatten)]
        ladder: LadderArgs,
        #[command(flatten)]
        common: Common,
    },
    /// phi(r) over one log-period.
    Phi {
        #[arg(long)]
        points: Option<usize>,
        #[command(flatten)]
        ladder: LadderArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Exponent regression of log D on log log |x|.
    Delta {
        /// lattice or continuum.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long = "scale")]
        scales: Vec<f64>,
        #[arg(long)]
        replicates: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Tail frequencies of the lattice distance.
    Tailcheck {
        #[arg(long = "x")]
        xs: Vec<u64>,
        #[arg(long)]
        replicates: Option<usize>,
        /// Number of halvings in the small-c sweep.
        #[arg(long)]
        c_steps: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Two-sample KS check of the fixed-point identity for W.
    FixedPoint {
        #[arg(long)]
        n: Option<usize>,
        /// Use gamma^2 in place of gamma on the right side.
        #[arg(long)]
        negative_control: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Arc diagrams of one-dimensional samples, one per s.
    Fig1 {
        #[arg(long = "box")]
        box_side: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Lattice distance profile with long edges beneath.
    Fig2 {
        #[arg(long)]
        range: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Quick invariant suite; exit status 4 on failure.
    Selftest {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Clone, Default)]
struct LadderArgs {
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    replicas: Option<usize>,
}

#[derive(Debug)]
enum Fail {
    Usage(String),
    Core(Error),
    Selftest(usize),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail::Core(e.into())
    }
}

type Res<T> = std::result::Result<T, Fail>;

/// Flag > config file > default; every resolved value is recorded.
struct Resolver {
    file: Config,
    resolved: Config,
}

impl Resolver {
    fn new(common: &Common) -> Res<Self> {
        let file = match &common.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        Ok(Resolver {
            file,
            resolved: Config::default(),
        })
    }

    fn value<T: std::str::FromStr + ToString>(&mut self, key: &str, flag: Option<T>, default: T) -> Res<T> {
        let v = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(text) => text
                    .parse()
                    .map_err(|_| Fail::Usage(format!("config key {key}: cannot parse {text:?}")))?,
                None => default,
            },
        };
        self.resolved.set(key, vec![v.to_string()]);
        Ok(v)
    }

    fn list<T: std::str::FromStr + ToString + Clone>(&mut self, key: &str, flags: &[T], default: &[T]) -> Res<Vec<T>> {
        let vs: Vec<T> = if !flags.is_empty() {
            flags.to_vec()
        } else if !self.file.get_all(key).is_empty() {
            self.file
                .get_all(key)
                .iter()
                .map(|t| t.parse().map_err(|_| Fail::Usage(format!("config key {key}: cannot parse {t:?}"))))
                .collect::<Res<_>>()?
        } else {
            default.to_vec()
        };
        self.resolved.set(key, vs.iter().map(ToString::to_string).collect());
        Ok(vs)
    }

    fn flag(&mut self, key: &str, flag: bool) -> Res<bool> {
        let v = flag || self.file.get(key).map(|t| t == "true").unwrap_or(false);
        self.resolved.set(key, vec![v.to_string()]);
        Ok(v)
    }
}

/// Resolved settings shared by all commands.
struct Ctx {
    params: ModelParams,
    s_list: Vec<f64>,
    seed: SeedSpec,
    out: PathBuf,
    budget: Budget,
    repro: bool,
    res: Resolver,
    manifest_extra: Vec<(String, serde_json::Value)>,
    outputs: Vec<(String, String)>,
    edges: u64,
}

impl Ctx {
    fn new(common: &Common, default_s: &[f64]) -> Res<Self> {
        let mut res = Resolver::new(common)?;
        let d = res.value("d", common.d, 1usize)?;
        let s_list = res.list("s", &common.s, default_s)?;
        let beta = res.value("beta", common.beta, 1.0)?;
        let eta = res.value("eta", common.eta, 1.0)?;
        let norm: Norm = res.value("norm", common.norm.clone(), "l2".to_string())?.parse()?;
        let master_seed = res.value("master_seed", common.master_seed, 0u64)?;
        let budget = res.value("budget", common.budget, Budget::default().max_items)?;
        let repro = res.flag("repro", common.repro)?;
        let out = common
            .out
            .clone()
            .or_else(|| res.file.get("out").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        if let Some(t) = common.threads {
            // the pool only changes scheduling; every stream is fixed by its seed path
            rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build_global()
                .map_err(|e| Fail::Usage(e.to_string()))?;
        }
        let params = ModelParams::new(d, s_list[0], beta)?.with_eta(eta)?.with_norm(norm);
        std::fs::create_dir_all(&out)?;
        Ok(Ctx {
            params,
            s_list,
            seed: SeedSpec::new(master_seed),
            out,
            budget: Budget::new(budget),
            repro,
            res,
            manifest_extra: Vec::new(),
            outputs: Vec::new(),
            edges: 0,
        })
    }

    fn write(&mut self, label: &str, name: &str, contents: &str) -> Res<PathBuf> {
        let p = self.out.join(name);
        std::fs::write(&p, contents)?;
        self.outputs.push((label.to_string(), p.display().to_string()));
        Ok(p)
    }

    fn finish(mut self, command: &str, started: Instant) -> Res<()> {
        let cfg = self.res.resolved.clone();
        std::fs::write(self.out.join("config.txt"), cfg.to_text())?;
        let mut m = RunManifest::new(command, cfg, self.seed.master_seed);
        m.outputs.extend(self.outputs.drain(..));
        m.extra.extend(self.manifest_extra.drain(..));
        m.telemetry.wall_clock_s = started.elapsed().as_secs_f64();
        m.telemetry.edges = self.edges;
        std::fs::write(self.out.join("manifest.json"), m.to_json()?)?;
        Ok(())
    }
}

fn parse_point(text: &str, d: usize) -> Res<Vec<f64>> {
    let v: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Fail::Usage(format!("bad coordinate {t:?}"))))
        .collect::<Res<_>>()?;
    if v.len() != d {
        return Err(Fail::Usage(format!("point {text:?} has {} coordinates, expected {d}", v.len())));
    }
    Ok(v)
}

fn json_line(v: &serde_json::Value) -> String {
    format!("{v}\n")
}

fn run(cli: Cli) -> Res<()> {
    let started = Instant::now();
    match cli.cmd {
        Cmd::SampleLattice {
            side,
            distance_field,
            common,
        } => {
            let mut ctx = Ctx::new(&common, &[1.5])?;
            let side = ctx.res.value("side", side, 1024usize)?;
            let want_field = ctx.res.flag("distance_field", distance_field)?;
            let g = sample_lattice_graph(&ctx.params, side, &ctx.seed, &ctx.budget)?;
            ctx.edges = g.n_long_edges() as u64;
            ctx.write("graph", "lattice.jsonl", &g.to_jsonl()?)?;
            if want_field {
                let f = bfs_distance(&g, &vec![0; ctx.params.d])?;
                let csv = f.to_csv(&ctx.params, &ctx.seed.label()).to_string();
                ctx.write("distance_field", "distances.csv", &csv)?;
            }
            println!("long_edges {}", g.n_long_edges());
            ctx.finish("sample-lattice", started)
        }
        Cmd::SampleContinuum {
            radius,
            center,
            ell_min,
            common,
        } => {
            let mut ctx = Ctx::new(&common, &[1.5])?;
            let d = ctx.params.d;
            let radius = ctx.res.value("radius", radius, 100.0)?;
            let zero = vec!["0"; d].join(",");
            let center = ctx.res.value("center", center, zero)?;
            let ell = ctx.res.value("ell_min", ell_min, 1.0)?;
            let w = Window::new(parse_point(&center, d)?, radius)?;
            let s = sample_continuum_edges(&ctx.params, &w, ell, &ctx.seed, &ctx.budget)?;
            ctx.edges = s.len() as u64;
            ctx.write("edges", "edges.jsonl", &s.to_jsonl()?)?;
            println!("edges {}", s.len());
            ctx.finish("sample-continuum", started)
        }
        Cmd::Dist {
            x,
            y,
            edges,
            sample,
            k,
            common,
        } => {
            let mut ctx = Ctx::new(&common, &[1.5])?;
            let d = ctx.params.d;
            let zero = vec!["0"; d].join(",");
            let xs = ctx.res.value("x", x, zero.clone())?;
            let ys = ctx.res.value("y", y, zero)?;
            let (x, y) = (parse_point(&xs, d)?, parse_point(&ys, d)?);
            let k = ctx.res.value("k", k, 0u32)?;
            let sample_fresh = ctx.res.flag("sample", sample)?;
            let edges_path = edges.or_else(|| ctx.res.file.get("edges").map(PathBuf::from));
            if let Some(p) = &edges_path {
                ctx.res.resolved.set("edges", vec![p.display().to_string()]);
            }
            let r: PathResult = match (edges_path, sample_fresh) {
                (Some(p), _) => {
                    let s = EdgeSample::from_jsonl(&std::fs::read_to_string(p)?)?;
                    ctx.edges = s.len() as u64;
                    restricted_distance_k(&s, &x, &y, k)?
                }
                (None, true) => sample_restricted_distance(&ctx.params, &x, &y, &ctx.seed, &ctx.budget)?,
                (None, false) => {
                    let r = 2.0 * norm_dist(&x, &y, ctx.params.norm).max(0.5);
                    let radius = lrp_core::distance::admissibility_radius(r / 2.0, 0.5 * (1.0 + ctx.params.gamma()), k).max(r);
                    let s = EdgeSample::empty(&ctx.params, Window::new(x.clone(), radius)?, 1.0);
                    restricted_distance_k(&s, &x, &y, k)?
                }
            };
            ctx.write("path", "path.json", &format!("{}\n", r.to_json()?))?;
            println!("{}", io::fmt_f64(r.value));
            ctx.finish("dist", started)
        }
        Cmd::Ladder { ladder, common } => {
            let mut ctx = Ctx::new(&common, &[1.5])?;
            let cfg = ladder_config(&mut ctx, &ladder)?;
            let lad = run_ladder(&ctx.params, &cfg, &ctx.seed, &ctx.budget)?;
            let tr = w_truncation(&ctx.params, LADDER_W_TOL)?;
            ctx.manifest_extra.push(("w_truncation".into(), serde_json::to_value(&tr).map_err(Error::from)?));
            ctx.write("ladder", "ladder.csv", &lad.to_csv().to_string())?;
            ctx.write("ladder_values", "ladder_values.csv", &lad.values_csv().to_string())?;
            ctx.write("summary", "ladder.json", &format!("{}\n", lad.summary_json()?))?;
            for (n, q) in lad.raw_ratios() {
                println!("ratio {n}->{} {}", n + 1, io::fmt_f64(q));
            }
            if let Ok(est) = estimate_l(&lad, None) {
                println!("L_hat {} +- {}", io::fmt_f64(est.value.mean), io::fmt_f64(est.value.half_width));
            }
            let (rho, p) = b_hat_trend(&lad, 3);
            println!("b_hat trend rho {} p {}", io::fmt_f64(rho), io::fmt_f64(p));
            if lad.truncated {
                println!("ladder truncated by budget at level {}", lad.levels.len());
            }
            ctx.finish("ladder", started)
        }
        Cmd::Phi { points, ladder, common } => {
            let mut ctx = Ctx::new(&common, &[1.5])?;
            let points = ctx.res.value("points", points, 8usize)?;
            let cfg = ladder_config(&mut ctx, &ladder)?;
            let grid = phi_grid(ctx.params.gamma(), points);
            let prof = phi_profile(&ctx.params, &grid, &cfg, &ctx.seed, &ctx.budget)?;
            ctx.write("phi", "phi.csv", &prof.to_csv().to_string())?;
            println!("agree {} convex {} positive {}", prof.all_agree(), prof.convex_within_ci(), prof.positive());
            ctx.finish("phi", started)
        }
        Cmd::Delta {
            kind,
            scales,
            replicates,
            common,
        } => {
            let mut ctx = Ctx::new(&common, &[1.5])?;
            let kind = match ctx.res.value("kind", kind, "lattice".to_string())?.as_str() {
                "lattice" => DistanceKind::Lattice,
                "continuum" => DistanceKind::Continuum,
                other => return Err(Fail::Usage(format!("unknown kind {other:?}"))),
            };
            let default: Vec<f64> = (8..=16).map(|k| 2f64.powi(k)).collect();
            let scales = ctx.res.list("scale", &scales, &default)?;
            let reps = ctx.res.value("replicates", replicates, 100usize)?;
            let fit = delta_regression(&ctx.params, kind, &scales, reps, &ctx.seed, &ctx.budget)?;
            ctx.write("delta", "delta.csv", &fit.to_csv().to_string())?;
            let summary = serde_json::json!({
                "kind": "delta",
                "params_hash": io::params_hash(&ctx.params),
                "seed": ctx.seed.label(),
                "version": io::ARTIFACT_VERSION,
                "delta_hat": io::F17(fit.delta_hat()),
                "half_width": io::F17(fit.fit.slope_half_width()),
                "target": io::F17(fit.target),
                "in_band": fit.in_band(),
            });
            ctx.write("summary", "delta.json", &json_line(&summary))?;
            println!(
                "delta_hat {} +- {} target {}",
                io::fmt_f64(fit.delta_hat()),
                io::fmt_f64(fit.fit.slope_half_width()),
                io::fmt_f64(fit.target)
            );
            ctx.finish("delta", started)
        }
        Cmd::Tailcheck {
            xs,
            replicates,
            c_steps,
            common,
        } => {
            let mut ctx = Ctx::new(&common, &[1.5])?;
            let default: Vec<u64> = (8..=14).map(|k| 1u64 << k).collect();
            let xs = ctx.res.list("x", &xs, &default)?;
            let reps = ctx.res.value("replicates", replicates, 200usize)?;
            let steps = ctx.res.value("c_steps", c_steps, 8usize)?;
            let fit = tail_check(
                &ctx.params,
                default_tail_n(&ctx.params),
                &xs,
                reps,
                &c_sweep_grid(steps),
                &ctx.seed,
                &ctx.budget,
            )?;
            ctx.write("tail", "tail.csv", &fit.to_csv().to_string())?;
            ctx.write("c_sweep", "tail_sweep.csv", &fit.sweep_csv().to_string())?;
            match &fit.slope {
                Some(f) => println!("slope {} +- {}", io::fmt_f64(f.slope), io::fmt_f64(f.slope_half_width())),
                None => println!("slope unavailable (fewer than two usable scales)"),
            }
            for (c, p) in &fit.c_sweep {
                println!("c {} p {}", io::fmt_f64(*c), io::fmt_f64(*p));
            }
            ctx.finish("tailcheck", started)
        }
        Cmd::FixedPoint {
            n,
            negative_control,
            common,
        } => {
            let mut ctx = Ctx::new(&common, &[1.5])?;
            let n = ctx.res.value("n", n, 100_000usize)?;
            let neg = ctx.res.flag("negative_control", negative_control)?;
            if n < 1000 {
                return Err(Fail::Usage("fixed-point needs n >= 1000".into()));
            }
            let g = ctx.params.gamma();
            let e = if neg { g * g } else { g };
            let (l, r) = fixed_point_samples(&ctx.params, n, LADDER_W_TOL, e, &ctx.seed)?;
            let ks = ks_two_sample(&l, &r);
            let crit = ks_critical_two_sample(n, n, 0.01);
            let summary = serde_json::json!({
                "kind": "fixed_point",
                "params_hash": io::params_hash(&ctx.params),
                "seed": ctx.seed.label(),
                "version": io::ARTIFACT_VERSION,
                "n": n,
                "negative_control": neg,
                "ks": io::F17(ks),
                "critical_1pct": io::F17(crit),
                "pass": ks < crit,
            });
            ctx.write("summary", "fixed_point.json", &json_line(&summary))?;
            println!("ks {} critical {} pass {}", io::fmt_f64(ks), io::fmt_f64(crit), ks < crit);
            ctx.finish("fixed-point", started)
        }
        Cmd::Fig1 { box_side, common } => {
            let mut ctx = Ctx::new(&common, &[1.1, 1.4, 1.7])?;
            let box_side = ctx.res.value("box", box_side, 5000.0)?;
            let mut rows = CsvTable::new(["s", "edges", "expected", "z"]).with_comment(io::provenance_comment(&ctx.params, &ctx.seed.label()));
            for (i, &s) in ctx.s_list.clone().iter().enumerate() {
                let p = ModelParams::new(1, s, ctx.params.beta)?.with_norm(ctx.params.norm);
                let panel = arc_panel(&p, box_side, &ctx.seed.child(i as u64), &ctx.budget)?;
                ctx.edges += panel.sample.len() as u64;
                let svg = render_arc_diagram(&panel.sample, ctx.repro)?;
                ctx.write(&format!("fig1_s{s}"), &format!("fig1_s{s}.svg"), &svg)?;
                rows.push(vec![
                    io::fmt_f64(s),
                    panel.sample.len().to_string(),
                    io::fmt_f64(panel.expected),
                    io::fmt_f64(panel.z_score()),
                ]);
                println!("s {s} arcs {} expected {:.1} z {:.2}", panel.sample.len(), panel.expected, panel.z_score());
            }
            ctx.write("counts", "fig1_counts.csv", &rows.to_string())?;
            ctx.finish("fig1", started)
        }
        Cmd::Fig2 { range, common } => {
            let mut ctx = Ctx::new(&common, &[1.8])?;
            let range = ctx.res.value("range", range, 10_000u64)?;
            if ctx.params.d != 1 {
                return Err(Fail::Usage("fig2 draws d = 1 profiles".into()));
            }
            let fig = profile_figure(&ctx.params, range, &ctx.seed, &ctx.budget)?;
            ctx.edges = fig.profile.long_edges.len() as u64;
            let svg = render_distance_profile(&fig.profile, ctx.repro)?;
            ctx.write("fig2", "fig2.svg", &svg)?;
            let mut t = CsvTable::new(["offset", "distance"]).with_comment(io::provenance_comment(&ctx.params, &ctx.seed.label()));
            for (o, dv) in &fig.profile.points {
                t.push(vec![o[0].to_string(), dv.to_string()]);
            }
            ctx.write("profile", "fig2_profile.csv", &t.to_string())?;
            println!(
                "max {} bound {} fitted_c {} dips {}",
                fig.max_distance,
                io::fmt_f64(fig.bound),
                io::fmt_f64(fig.fitted_c),
                fig.dips.len()
            );
            ctx.finish("fig2", started)
        }
        Cmd::Selftest { common } => {
            let ctx = Ctx::new(&common, &[1.5])?;
            let failures = selftest(&ctx)?;
            ctx.finish("selftest", started)?;
            if failures > 0 {
                return Err(Fail::Selftest(failures));
            }
            Ok(())
        }
    }
}

fn ladder_config(ctx: &mut Ctx, a: &LadderArgs) -> Res<LadderConfig> {
    let r = ctx.res.value("r", a.r, std::f64::consts::E)?;
    let n_max = ctx.res.value("n_max", a.n_max, 8usize)?;
    let reps = ctx.res.value("replicates", a.replicates, 200usize)?;
    let per_w = ctx.res.value("replicas", a.replicas, 4usize)?;
    Ok(LadderConfig::new(r, n_max, reps, per_w))
}

/// Small, fast versions of the invariant checks.
fn selftest(ctx: &Ctx) -> Res<usize> {
    use lrp_core::distance::{brute_force_distance, shortest_path};
    let mut failures = 0;
    let mut report = |name: &str, ok: bool| {
        println!("{} {name}", if ok { "PASS" } else { "FAIL" });
        failures += usize::from(!ok);
    };
    let seed = ctx.seed.child(99);

    // engine against exhaustive search
    let mut rng = seed.child(0).stream();
    let mut ok = true;
    for _ in 0..200 {
        let d = 1 + rng.below(2) as usize;
        let norm = Norm::ALL[rng.below(3) as usize];
        let mut pt = |r: f64| (0..d).map(|_| r * (2.0 * rng.uniform() - 1.0)).collect::<Vec<f64>>();
        let x = pt(10.0);
        let y = pt(10.0);
        let m = 6;
        let edges: Vec<(Vec<f64>, Vec<f64>)> = (0..m).map(|_| (pt(12.0), pt(12.0))).collect();
        let flat: Vec<f64> = edges.iter().flat_map(|(a, b)| a.iter().chain(b).copied()).collect();
        let ball = Window::new(vec![0.0; d], 1e9)?;
        let a = brute_force_distance(&edges, &x, &y, &ball, norm)?.value;
        let b = shortest_path(d, norm, &x, &y, &flat).value;
        ok &= (a - b).abs() < 1e-9;
    }
    report("engine matches exhaustive search", ok);

    // Z radial law
    let p = ModelParams::new(1, 1.5, 1.0)?;
    let a = lrp_core::randomization::z_rate(&p)?;
    let n = 20_000;
    let g = Gamma::new(0.5, 1.0).map_err(|e| Fail::Core(Error::Domain(e.to_string())))?;
    let ts: Vec<f64> = (0..n)
        .map(|i| {
            let z = lrp_core::randomization::sample_z(&p, &seed.child(1).child(i)).map(|s| s.z[0]).unwrap_or(f64::NAN);
            a * z * z
        })
        .collect();
    let ks = lrp_core::stats::ks_one_sample(&ts, |t| g.cdf(t));
    report("Z radial law", ks < lrp_core::stats::ks_critical_one_sample(n as usize, 0.01));

    // fixed point
    let (l, r) = fixed_point_samples(&p, 20_000, LADDER_W_TOL, p.gamma(), &seed.child(2))?;
    report("W fixed point", ks_two_sample(&l, &r) < ks_critical_two_sample(20_000, 20_000, 0.01));

    // squeeze on a sampled window
    let mut ok = true;
    for i in 0..50 {
        let r = sample_restricted_distance(&p, &[0.0], &[200.0], &seed.child(3).child(i), &ctx.budget)?;
        ok &= r.value <= 200.0 && r.value >= 1.0;
    }
    report("restricted distance squeeze", ok);

    // lattice Lipschitz along nearest-neighbour steps
    let gph = sample_lattice_graph(&p, 512, &seed.child(4), &ctx.budget)?;
    let f = bfs_distance(&gph, &[0])?;
    let ok = f.dist.windows(2).all(|w| w[0].abs_diff(w[1]) <= 1);
    report("lattice distance is 1-Lipschitz", ok);
    Ok(failures)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(2)
        }
        Err(Fail::Core(Error::Budget { estimate, budget })) => {
            eprintln!("refused: estimated {estimate:.3e} items exceeds budget {budget:.3e}");
            ExitCode::from(3)
        }
        Err(Fail::Core(e @ (Error::Domain(_) | Error::Parse(_)))) => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(Fail::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Fail::Selftest(n)) => {
            eprintln!("selftest: {n} check(s) failed");
            ExitCode::from(4)
        }
    }
}
