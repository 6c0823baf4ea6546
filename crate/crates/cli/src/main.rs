use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use polystatics_core::dual::{build_dual, cell_equilibrium_residuals, update_member_forces};
use polystatics_core::face_area::{build_area_matrix, derivation_trace, signed_area};
use polystatics_core::face_solver::{analyze_constraints, solve_face, Cgdof};
use polystatics_core::model::{load_complex, ConstraintScript, MeshDocument, PolyhedralComplex};
use polystatics_core::nalgebra::DMatrix;
use polystatics_core::poly_solver::{run_pipeline, PipelineFailure};
use polystatics_core::{Error, NuPolicy, RootPolicy, SolverConfig};
use polystatics_service::AppState;
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "polystatics", version, about = "Constrained polyhedral graphic statics")]
struct Cli {
    #[command(flatten)]
    tol: TolArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TolArgs {
    #[arg(long, global = true)]
    tol_planar: Option<f64>,
    #[arg(long, global = true)]
    tol_closure: Option<f64>,
    #[arg(long, global = true)]
    tol_pivot: Option<f64>,
    #[arg(long, global = true)]
    rcond: Option<f64>,
    #[arg(long, global = true)]
    tol_solve: Option<f64>,
    #[arg(long, global = true)]
    tol_area: Option<f64>,
    #[arg(long, global = true)]
    tol_zero: Option<f64>,
    /// Least-change reference: current|ones
    #[arg(long, global = true)]
    nu: Option<NuPolicy>,
    /// Root of the area quadratic: near|low|high
    #[arg(long, global = true)]
    root: Option<RootPolicy>,
    #[arg(long, global = true)]
    xi_scale: Option<f64>,
}

impl TolArgs {
    fn config(&self) -> anyhow::Result<SolverConfig> {
        let mut c = SolverConfig::default();
        let set = |field: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *field = v;
            }
        };
        set(&mut c.tol_planar, self.tol_planar);
        set(&mut c.tol_closure, self.tol_closure);
        set(&mut c.tol_pivot, self.tol_pivot);
        set(&mut c.rcond, self.rcond);
        set(&mut c.tol_solve, self.tol_solve);
        set(&mut c.tol_area, self.tol_area);
        set(&mut c.tol_zero, self.tol_zero);
        set(&mut c.xi_scale, self.xi_scale);
        if let Some(nu) = self.nu {
            c.nu_policy = nu;
        }
        if let Some(root) = self.root {
            c.root_policy = root;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a model and print a summary
    Check { model: PathBuf },
    /// Signed area and area matrix of one face
    Area {
        model: PathBuf,
        #[arg(long)]
        face: usize,
        /// Also print the intermediate quantities of the area form
        #[arg(long)]
        trace: bool,
    },
    /// Constrained degrees of freedom of one face
    Gdof {
        model: PathBuf,
        #[arg(long)]
        face: usize,
        /// Fixed edge length, EDGE=LENGTH (repeatable)
        #[arg(long = "fix", value_parser = parse_fix)]
        fix: Vec<(usize, f64)>,
    },
    /// Solve one face for a target area
    SolveFace {
        model: PathBuf,
        #[arg(long)]
        face: usize,
        #[arg(long, allow_negative_numbers = true)]
        target_area: f64,
        #[arg(long = "fix", value_parser = parse_fix)]
        fix: Vec<(usize, f64)>,
    },
    /// Run a constraint script over the whole polyhedron
    Solve {
        model: PathBuf,
        constraints: PathBuf,
        /// Output directory
        #[arg(short, long)]
        output: PathBuf,
        /// Rebuild the dual from the solved primal instead of re-signing it
        #[arg(long)]
        rebuild_dual: bool,
    },
    /// Reciprocal diagram of a model
    Dual {
        model: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Start the HTTP service
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        state_dir: Option<PathBuf>,
    },
}

fn parse_fix(s: &str) -> Result<(usize, f64), String> {
    let (e, l) = s.split_once('=').ok_or_else(|| format!("expected EDGE=LENGTH, got `{s}`"))?;
    let e = e.trim().parse().map_err(|_| format!("bad edge index `{e}`"))?;
    let l = l.trim().parse().map_err(|_| format!("bad length `{l}`"))?;
    Ok((e, l))
}

/// Failure that maps to exit code 1.
#[derive(Debug)]
struct ConstraintFailure(String);

impl std::fmt::Display for ConstraintFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConstraintFailure {}

/// Nine significant digits.
fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..9).contains(&exp) {
        return format!("{x:.8e}");
    }
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn print_matrix(m: &DMatrix<f64>) {
    let cells: Vec<Vec<String>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| num(m[(i, j)])).collect())
        .collect();
    let width = cells.iter().flatten().map(String::len).max().unwrap_or(1);
    for row in cells {
        let line: Vec<String> = row.iter().map(|c| format!("{c:>width$}")).collect();
        println!("  {}", line.join("  "));
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| {
        let line = text.lines().nth(e.line().saturating_sub(1)).unwrap_or("");
        let caret = " ".repeat(e.column().saturating_sub(1));
        anyhow!("{}:{}:{}: {e}\n  {line}\n  {caret}^", path.display(), e.line(), e.column())
    })
}

fn load(path: &Path, cfg: &SolverConfig) -> anyhow::Result<PolyhedralComplex> {
    let doc: MeshDocument = read_json(path)?;
    load_complex(&doc, cfg).with_context(|| format!("loading {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn check(model: &Path, cfg: &SolverConfig) -> anyhow::Result<()> {
    let c = load(model, cfg)?;
    println!(
        "{} vertices, {} edges, {} faces, {} cells",
        c.vertices().len(),
        c.edge_count(),
        c.face_count(),
        c.cells().len()
    );
    for f in 0..c.face_count() {
        let area = signed_area(&build_area_matrix(&c, f)?, &c.face_lengths(f, c.lengths()))?;
        let n = c.face(f).normal;
        println!(
            "face {f}: {} edges, area {}, normal ({}, {}, {}), cells {:?}",
            c.face(f).edge_loop.len(),
            num(area),
            num(n.x),
            num(n.y),
            num(n.z),
            c.face_cells(f).iter().map(|&(cell, _)| cell).collect::<Vec<_>>()
        );
    }
    for (i, r) in cell_equilibrium_residuals(&c)?.iter().enumerate() {
        println!("cell {i}: area-weighted normal sum {}", num(r.norm()));
    }
    let rec = c.reconstruct_vertices(c.lengths(), cfg)?;
    println!("closure error {}", num(rec.closure_error));
    Ok(())
}

fn area(model: &Path, face: usize, trace: bool, cfg: &SolverConfig) -> anyhow::Result<()> {
    let c = load(model, cfg)?;
    let m = build_area_matrix(&c, face)?;
    let q = c.face_lengths(face, c.lengths());
    println!("face {face} signed area {}", num(signed_area(&m, &q)?));
    println!("edges {:?}", c.face_edge_ids(face));
    println!("M (symmetric):");
    print_matrix(&m.matrix);
    println!("M (raw):");
    print_matrix(&m.raw);
    if trace {
        let start = c.vertices()[c.face_vertices(face)[0]];
        let t = derivation_trace(&c.face_directions(face), &c.face(face).normal, &q, start)?;
        println!("mu:");
        print_matrix(&t.mu);
        println!("h:");
        print_matrix(&t.h);
        println!("mean heights:");
        print_matrix(&DMatrix::from_column_slice(1, t.mean_heights.len(), t.mean_heights.as_slice()));
        println!("centroid ({}, {}, {})", num(t.centroid.x), num(t.centroid.y), num(t.centroid.z));
    }
    Ok(())
}

fn gdof(model: &Path, face: usize, fix: &[(usize, f64)], cfg: &SolverConfig) -> anyhow::Result<()> {
    let c = load(model, cfg)?;
    let fixed: BTreeMap<usize, f64> = fix.iter().copied().collect();
    let a = analyze_constraints(&c, face, &fixed, None, cfg)?;
    let cl = &a.classification;
    println!("cgdof {}", cl.cgdof);
    println!("RREF:");
    print_matrix(&a.rref.matrix);
    if cl.cgdof == Cgdof::Inconsistent {
        return Err(ConstraintFailure(format!("face {face}: fixed lengths are contradictory")).into());
    }
    println!("fix {:?}", a.edge_ids(&cl.fix));
    println!("nfd {:?}", a.edge_ids(&cl.nfd));
    println!("nci {:?}", a.edge_ids(&cl.nci));
    println!("ci {:?}", cl.ci.map(|p| a.edge_id(p)));
    Ok(())
}

fn solve_face_cmd(
    model: &Path,
    face: usize,
    target: f64,
    fix: &[(usize, f64)],
    cfg: &SolverConfig,
) -> anyhow::Result<()> {
    let c = load(model, cfg)?;
    let fixed: BTreeMap<usize, f64> = fix.iter().copied().collect();
    let (a, r) = solve_face(&c, face, &fixed, target, cfg.root_policy, cfg)?;
    let q = &r.quadratic;
    println!("cgdof {}", a.classification.cgdof);
    println!("a {}  b {}  c {}", num(q.a), num(q.b), num(q.c));
    let roots: Vec<String> = r.roots.iter().map(|&x| num(x)).collect();
    println!("roots {}", roots.join(" "));
    println!("chosen {} (edge {})", num(r.chosen_root), a.edge_id(r.ci));
    for (pos, &e) in a.system.edges.iter().enumerate() {
        println!("edge {e}: {}", num(r.updated_lengths[pos]));
    }
    println!("achieved area {}", num(r.achieved_area));
    Ok(())
}

fn solve(model: &Path, constraints: &Path, out: &Path, rebuild: bool, cfg: &SolverConfig) -> anyhow::Result<()> {
    let c = load(model, cfg)?;
    let script: ConstraintScript = read_json(constraints)?;
    let dual = build_dual(&c, cfg)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let (state, failure) = match run_pipeline(&c, &script, cfg) {
        Ok(s) => (s, None),
        Err(f) => {
            let PipelineFailure { state, step, face, source } = *f;
            (state, Some((step, face, source)))
        }
    };
    let dual = if rebuild {
        build_dual(&state.complex, cfg)?
    } else {
        update_member_forces(&state.complex, &dual, cfg)?
    };
    write_json(&out.join("primal.json"), &state.complex.to_document())?;
    write_json(&out.join("dual.json"), &dual.to_document())?;
    write_json(&out.join("members.json"), &serde_json::json!({ "members": dual.members }))?;
    write_json(
        &out.join("steps.json"),
        &serde_json::json!({
            "fixed_edges": state.fixed_edges,
            "lengths": state.complex.lengths().as_slice(),
            "steps": state.step_log,
        }),
    )?;
    for s in &state.step_log {
        println!(
            "step {}: face {} target {} achieved {} root {} residual {}",
            s.step,
            s.face_index,
            num(s.target_area),
            num(s.achieved_area),
            num(s.chosen_root),
            num(s.residual)
        );
    }
    if let Some((step, face, source)) = failure {
        let at = match (step, face) {
            (Some(s), Some(f)) => format!("step {s} (face {f})"),
            _ => "initial fixed edges".to_string(),
        };
        let err = anyhow::Error::new(source).context(format!("pipeline stopped at {at}; partial results written"));
        return Err(err);
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn dual_cmd(model: &Path, output: Option<&Path>, cfg: &SolverConfig) -> anyhow::Result<()> {
    let c = load(model, cfg)?;
    let d = build_dual(&c, cfg)?;
    match output {
        Some(p) => write_json(p, &d.to_document()),
        None => {
            println!("{}", serde_json::to_string_pretty(&d.to_document())?);
            Ok(())
        }
    }
}

async fn serve(host: &str, port: u16, state_dir: Option<PathBuf>, cfg: SolverConfig) -> anyhow::Result<()> {
    let app = Arc::new(AppState::new(cfg, state_dir));
    let restored = app.restore()?;
    let addr: SocketAddr = format!("{host}:{port}").parse().context("bad listen address")?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{} ({restored} sessions restored)", listener.local_addr()?);
    polystatics_service::serve(listener, app).await?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = cli.tol.config()?;
    match cli.command {
        Command::Check { model } => check(&model, &cfg),
        Command::Area { model, face, trace } => area(&model, face, trace, &cfg),
        Command::Gdof { model, face, fix } => gdof(&model, face, &fix, &cfg),
        Command::SolveFace {
            model,
            face,
            target_area,
            fix,
        } => solve_face_cmd(&model, face, target_area, &fix, &cfg),
        Command::Solve {
            model,
            constraints,
            output,
            rebuild_dual,
        } => solve(&model, &constraints, &output, rebuild_dual, &cfg),
        Command::Dual { model, output } => dual_cmd(&model, output.as_deref(), &cfg),
        Command::Serve { port, host, state_dir } => {
            tracing_subscriber::fmt().with_writer(std::io::stderr).init();
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(&host, port, state_dir, cfg))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConstraintFailure>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return if e.is_constraint_failure() { 1 } else { 2 };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
