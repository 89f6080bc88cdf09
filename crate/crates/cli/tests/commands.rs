use std::path::Path;
use std::process::{Command, Output};

const BASE: &str = "\
stats = fermi
M = 7
eps_s = 2.0
J = 1.0
gamma_L = 0.5
beta = 1.0
omega_x = 0.2
omega_y = 0.2
omega_z = 0.05
mu_L0 = 1.401
mu_R0 = 0.907
";

fn qtransport(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtransport"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// A short run: too short for the report, so it exits 4 but still writes.
fn short_run(dir: &Path, tag: &str) -> (Output, String, String, String) {
    let csv = dir.join(format!("{tag}.csv"));
    let summary = dir.join(format!("{tag}.txt"));
    let svg = dir.join(format!("{tag}.svg"));
    let text = format!(
        "{BASE}t_end = 300\nsampling = uniform:50\nout_csv = {}\nout_summary = {}\nout_svg = {}\n",
        csv.display(),
        summary.display(),
        svg.display()
    );
    let cfg = write_config(dir, &format!("{tag}.conf"), &text);
    let out = qtransport(&["run", &cfg, "--log-x"]);
    (
        out,
        std::fs::read_to_string(csv).unwrap(),
        std::fs::read_to_string(summary).unwrap(),
        std::fs::read_to_string(svg).unwrap(),
    )
}

#[test]
fn run_writes_documented_files() {
    let dir = tempfile::tempdir().unwrap();
    let (out, csv, summary, svg) = short_run(dir.path(), "a");
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).starts_with("error kind=check code=4 message="));

    let mut lines = csv.split('\n');
    assert_eq!(
        lines.next().unwrap(),
        "t,n_1,n_2,n_3,n_4,n_5,n_6,n_7,j_1,j_2,j_3,j_4,j_5,j_6,mu_L,mu_R,N_L,N_R,I,coh_max"
    );
    assert!(!csv.contains('\r'));
    assert!(csv.ends_with('\n'));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 20);
    assert_eq!(first[14], "1.4010000000000000e0");
    // 17 significant digits survive a round trip
    for field in &first {
        let x: f64 = field.parse().unwrap();
        assert_eq!(&format!("{x:.16e}"), field);
    }
    assert_eq!(csv.lines().count(), 52);

    for key in [
        "tau_rel",
        "tau_eq_formula",
        "tau_eq_fitted",
        "mu_inf",
        "n_inf",
        "G_formula",
        "G_measured",
        "checks_passed",
    ] {
        assert!(summary.lines().any(|l| l.starts_with(&format!("{key}="))), "{key}");
    }
    assert!(summary.contains("checks_passed=false\n"));
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("log10 t"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (_, a, sa, _) = short_run(dir.path(), "a");
    let (_, b, sb, _) = short_run(dir.path(), "b");
    assert_eq!(a, b);
    assert_eq!(sa, sb);
}

#[test]
fn full_run_reports_checks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.conf", BASE);
    let out = qtransport(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    for name in ["homogeneity", "internal_macroscopic", "conductance", "ohmic"] {
        assert!(text.contains(&format!("consistency_{name}=true\n")), "{name}");
    }
    assert!(text.contains("checks_passed=true\n"));
}

#[test]
fn relax_and_equilibrium_print_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.conf", BASE);
    let relax = stdout(&qtransport(&["relax", &cfg]));
    assert!(relax.starts_with("tau_rel=2.78327693781946"));
    assert_eq!(relax.lines().filter(|l| l.starts_with("lambda_")).count(), 7);

    let eq = qtransport(&["equilibrium", &cfg]);
    assert_eq!(eq.status.code(), Some(0));
    let text = stdout(&eq);
    let mu: f64 = text
        .lines()
        .next()
        .unwrap()
        .strip_prefix("mu_inf=")
        .unwrap()
        .parse()
        .unwrap();
    assert!((mu - 1.17505687864411).abs() < 1e-10);
    assert!(text.contains("\nn_inf=") && text.contains("\nN_inf="));
}

#[test]
fn config_errors_exit_two_with_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let no_beta = write_config(dir.path(), "a.conf", &BASE.replace("beta = 1.0\n", ""));
    let out = qtransport(&["relax", &no_beta]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(
        stderr(&out).trim_end(),
        "error kind=config code=2 message=\"config error: missing key: beta\""
    );

    let hot_bose = write_config(dir.path(), "b.conf", &BASE.replace("stats = fermi", "stats = bose"));
    let out = qtransport(&["equilibrium", &hot_bose]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bose chemical potential rule"));

    let out = qtransport(&["relax", &no_beta.replace("a.conf", "missing.conf")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error kind=io"));

    let cfg = write_config(dir.path(), "c.conf", BASE);
    let out = qtransport(&["relax", &cfg, "--set", "colour=blue"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown key: colour"));

    let out = qtransport(&["sweep", &cfg, "--key", "J", "--values", "1,2", "--pair-offset", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numeric_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.conf", BASE);
    let out = qtransport(&["validate", &cfg, "--set", "M=12"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("error kind=numeric code=3"));
}

#[test]
fn sweep_rows_follow_the_grid() {
    // unbiased start at the resonant occupation: every point is stationary
    let dir = tempfile::tempdir().unwrap();
    let n0 = 1.0 / (1.0f64.exp() + 1.0);
    let text = BASE
        .replace("mu_L0 = 1.401", "mu_L0 = 1.0")
        .replace("mu_R0 = 0.907", "mu_R0 = 1.0")
        + &format!("lattice_init = uniform\nn0 = {n0}\nt_end = 400\nsampling = uniform:100\n");
    let cfg = write_config(dir.path(), "s.conf", &text);
    let rows = dir.path().join("rows.csv");
    let out = qtransport(&[
        "sweep",
        &cfg,
        "--key",
        "gamma_L",
        "--values",
        "0.8,0.2,0.5",
        "--out",
        rows.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let table = std::fs::read_to_string(rows).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(
        lines[0],
        "gamma_L,mu_inf,n_inf,N_inf,tau_rel,tau_eq_formula,tau_eq_fitted,G_formula,G_measured,G_fermi_bound,checks_passed"
    );
    let keys: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(
        keys,
        [
            "8.0000000000000004e-1",
            "2.0000000000000001e-1",
            "5.0000000000000000e-1"
        ]
    );
    for l in &lines[1..] {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!((f[5], f[8], f[10]), ("none", "none", "true"));
    }
}

#[test]
fn validate_small_fermi_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "v.conf", &format!("{BASE}reltol = 1e-10\nabstol = 1e-12\n"));
    let out = qtransport(&["validate", &cfg, "--set", "M=2", "--t-end", "20", "--samples", "40"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let dev: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("sigma_dev="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(dev < 1e-6);
    assert!(text.contains("closure_passed=true"));
}
