//! Command line driver: simulation runs plus the three verification
//! suites (curvature, diffeomorphism, boundary extensions).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::{Vector2, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use facetgrow::dynamics::equilibrium_supersaturation;
use facetgrow::energy::{crystalline_curvature, curvature_oracle};
use facetgrow::extension::{build_extension_set, directional_derivative};
use facetgrow::geometry::measures;
use facetgrow::mapping::{pullback_facet_integral, LambdaMap, MappingConfig};
use facetgrow::sim::config::SimConfig;
use facetgrow::sim::runner::{run, RunOutcome};

#[derive(Parser)]
#[command(name = "facetgrow", about = "Faceted crystal growth simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory for time series and snapshots.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Seed for sampled verifications.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Suppress progress chatter.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a config file.
    Run { config: PathBuf },
    /// Print the curvature table and the definitional-oracle comparison.
    Curvature { config: PathBuf },
    /// Verify the moving-domain diffeomorphism on sampled points.
    MapVerify { config: PathBuf },
    /// Verify the boundary extension functions.
    ExtendVerify { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => cmd_run(&cli, config),
        Command::Curvature { config } => cmd_curvature(&cli, config),
        Command::MapVerify { config } => cmd_map_verify(&cli, config),
        Command::ExtendVerify { config } => cmd_extend_verify(&cli, config),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load(path: &PathBuf) -> facetgrow::Result<SimConfig> {
    let text = std::fs::read_to_string(path)?;
    SimConfig::from_toml(&text)
}

fn cmd_run(cli: &Cli, path: &PathBuf) -> facetgrow::Result<ExitCode> {
    let config = load(path)?;
    let result = run(&config, cli.output_dir.as_deref(), cli.quiet)?;
    match result.outcome {
        RunOutcome::Completed => {
            if !cli.quiet {
                println!("completed");
            }
            Ok(ExitCode::SUCCESS)
        }
        RunOutcome::Extinct { t } => {
            println!("extinct at t = {t}");
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_curvature(_cli: &Cli, path: &PathBuf) -> facetgrow::Result<ExitCode> {
    let config = load(path)?;
    let aniso = config.anisotropy()?;
    let state = config.initial_state()?;
    let rep = crystalline_curvature(&state, &aniso)?;
    let eq = equilibrium_supersaturation(&state, &aniso)?;
    println!("facet  kappa                  oracle                 |diff|     sigma_eq");
    let a = 1e-4 * state.diameter();
    let mut worst: f64 = 0.0;
    for i in 0..state.n_facets() {
        let oracle = curvature_oracle(&state, &aniso, i, a)?;
        let diff = (rep.kappa[i] - oracle).abs();
        worst = worst.max(diff / rep.kappa[i].abs().max(1.0));
        println!(
            "{i:<5}  {:+.15e}  {:+.15e}  {diff:.2e}  {:+.6}",
            rep.kappa[i], oracle, eq[i]
        );
    }
    println!("surface energy: {:.15e}", rep.surface_energy);
    println!("volume:         {:.15e}", rep.volume);
    println!("worst relative formula/oracle difference: {worst:.3e}");
    Ok(if worst <= 1e-6 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_map_verify(cli: &Cli, path: &PathBuf) -> facetgrow::Result<ExitCode> {
    let config = load(path)?;
    let state = config.initial_state()?;
    let cfg = MappingConfig::default_for(&state);
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let d = state.diameter0();
    let mut ok = true;
    let mut check = |name: &str, pass: bool, detail: String| {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    };

    // identity at z = 0
    let id_map = LambdaMap::build(&state, &vec![0.0; state.n_facets()], &cfg)?;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x = Vector3::new(
            rng.gen_range(-3.0 * d..3.0 * d),
            rng.gen_range(-3.0 * d..3.0 * d),
            rng.gen_range(-3.0 * d..3.0 * d),
        );
        worst = worst.max((id_map.apply(x) - x).norm());
    }
    check("identity at z=0", worst <= 1e-12 * d, format!("max |dx| = {worst:.3e}"));

    // random small displacement
    let amp = 0.05 * state.in_radius();
    let z: Vec<f64> = (0..state.n_facets()).map(|_| rng.gen_range(-amp..amp)).collect();
    let map = LambdaMap::build(&state, &z, &cfg)?;

    let mut far_ok = true;
    for _ in 0..200 {
        let dir = Vector3::new(
            rng.gen_range(-1.0..1.0_f64),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .normalize();
        let x = dir * rng.gen_range(10.0 * d..25.0 * d);
        far_ok &= map.apply(x) == x && map.jacobian(x).j == 1.0;
    }
    check("exact identity beyond 10 x diam", far_ok, "sampled 200 rays".into());

    let mut v_worst: f64 = 0.0;
    for i in 0..state.k() {
        let v0 = state.vertices[i];
        let img = map.apply(Vector3::new(v0.x, v0.y, 0.0));
        v_worst = v_worst.max((Vector2::new(img.x, img.y) - map.current.vertices[i]).norm());
    }
    check(
        "vertex images",
        v_worst <= 1e-6 * d,
        format!("max error = {v_worst:.3e}"),
    );

    let mut b_worst: f64 = 0.0;
    for i in 0..state.k() {
        let v0 = state.vertices[i];
        let v1 = state.vertices[(i + 1) % state.k()];
        for _ in 0..12 {
            let tpar = rng.gen_range(0.0..1.0);
            let s = rng.gen_range(-state.base.half_height0..state.base.half_height0);
            let e = v0 + (v1 - v0) * tpar;
            let img = map.apply(Vector3::new(e.x, e.y, s));
            let dist = (0..map.current.n_facets())
                .map(|f| map.current.distance_to_facet(f, img))
                .fold(f64::INFINITY, f64::min);
            b_worst = b_worst.max(dist);
        }
    }
    check(
        "boundary preservation",
        b_worst <= 1e-5 * d,
        format!("max distance = {b_worst:.3e}"),
    );

    let (mut j_min, mut j_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut j_pos = true;
    for _ in 0..2000 {
        let x = Vector3::new(
            rng.gen_range(-2.0 * d..2.0 * d),
            rng.gen_range(-2.0 * d..2.0 * d),
            rng.gen_range(-2.0 * d..2.0 * d),
        );
        let j = map.jacobian(x).j;
        j_pos &= j > 0.0;
        j_min = j_min.min(j);
        j_max = j_max.max(j);
    }
    check(
        "jacobian positivity",
        j_pos,
        format!("sampled J in [{j_min:.6}, {j_max:.6}]"),
    );

    let m = measures(&map.current)?;
    let mut p_worst: f64 = 0.0;
    for facet in 0..state.n_facets() {
        let area = pullback_facet_integral(&map, facet, |_| 1.0, 96)?;
        let expect = m.facet_area(&map.current, facet);
        p_worst = p_worst.max((area - expect).abs() / expect);
    }
    check(
        "pullback areas",
        p_worst <= 1e-4,
        format!("max relative error = {p_worst:.3e}"),
    );

    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_extend_verify(cli: &Cli, path: &PathBuf) -> facetgrow::Result<ExitCode> {
    let config = load(path)?;
    let state = config.initial_state()?;
    let m = measures(&state)?;
    let min_edge = m.edge_lengths.iter().cloned().fold(f64::INFINITY, f64::min);
    let eps = 0.2 * min_edge.min(m.height);
    let set = build_extension_set(&state, eps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let mut ok = true;

    let mut worst: f64 = 0.0;
    for i in 0..state.n_facets() {
        for j in 0..state.n_facets() {
            let nj = state.facet_normal3(j);
            for x in facet_interior_samples(&state, j, 2.0 * eps, &mut rng) {
                let der = directional_derivative(|y| set.extensions[i].eval(y), x, nj);
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((der - want).abs());
            }
        }
    }
    let pass = worst <= 1e-4;
    println!(
        "{} kronecker property: max |dh_i/dn_j - delta_ij| = {worst:.3e}",
        if pass { "PASS" } else { "FAIL" }
    );
    ok &= pass;

    let d = state.diameter();
    let mut supp_ok = true;
    for _ in 0..500 {
        let dir = Vector3::new(
            rng.gen_range(-1.0..1.0_f64),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .normalize();
        let x = dir * rng.gen_range(10.0 * d..40.0 * d);
        supp_ok &= set.extensions.iter().all(|h| h.eval(x) == 0.0);
    }
    println!(
        "{} compact support beyond 10 x diam (500 samples)",
        if supp_ok { "PASS" } else { "FAIL" }
    );
    ok &= supp_ok;

    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn facet_interior_samples(
    state: &facetgrow::geometry::CrystalState,
    j: usize,
    margin: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Vector3<f64>> {
    let mut pts = Vec::new();
    let k = state.k();
    if j < k {
        let v0 = state.vertices[j];
        let v1 = state.vertices[(j + 1) % k];
        let len = (v1 - v0).norm();
        let t = (v1 - v0) / len;
        for _ in 0..8 {
            let s = rng.gen_range(margin..len - margin);
            let z = rng.gen_range(state.l_b + margin..state.l_t - margin);
            let p = v0 + t * s;
            pts.push(Vector3::new(p.x, p.y, z));
        }
    } else {
        let height = if j == state.top_index() { state.l_t } else { state.l_b };
        let r_max = state.in_radius() - margin;
        for _ in 0..8 {
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let r = rng.gen_range(0.0..r_max);
            pts.push(Vector3::new(r * th.cos(), r * th.sin(), height));
        }
    }
    pts
}
