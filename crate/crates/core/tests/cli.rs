use std::path::Path;
use std::process::Command;

use pic_core::infometrics::{compute_report, MetricOptions};
use pic_core::rollout::ReturnMatrix;

fn pic(args: &[&str], out: &Path) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_pic"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "error")
        .output()
        .unwrap();
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into(),
        String::from_utf8_lossy(&o.stderr).into(),
    )
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(pic(&["--help"], d.path()).0, 0);
    assert_eq!(pic(&["estimate"], d.path()).0, 2);
    assert_eq!(pic(&["estimate", "--bogus"], d.path()).0, 2);
    assert_eq!(pic(&["estimate", "--env", "humanoid"], d.path()).0, 2);
    let (code, _, err) = pic(&["estimate", "--env", "synthetic", "--n", "3", "--m", "10", "--bins", "5"], d.path());
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("bin count"));
    assert_eq!(
        pic(&["estimate", "--env", "synthetic", "--n", "3", "--m", "10", "--bins", "5", "--allow-few-bins"], d.path())
            .0,
        0
    );
    let bad = d.path().join("bad.toml");
    std::fs::write(&bad, "[plan]\nn = \"many\"\n").unwrap();
    assert_eq!(pic(&["estimate", "--config", bad.to_str().unwrap()], d.path()).0, 2);
    assert_eq!(pic(&["estimate", "--config", "/nonexistent/x.toml"], d.path()).0, 2);
    assert_eq!(pic(&["estimate", "--env", "cartpole", "--horizon", "10"], d.path()).0, 2);
    assert_eq!(pic(&["correlate", "--table", d.path().join("missing.csv").to_str().unwrap()], d.path()).0, 2);
}

#[test]
fn estimate_outputs_recompute() {
    let d = tempfile::tempdir().unwrap();
    let (code, stdout, _) =
        pic(&["estimate", "--env", "synthetic", "--horizon", "2", "--n", "50", "--m", "20", "--seed", "5"], d.path());
    assert_eq!(code, 0);
    assert!(stdout.starts_with("synthetic_t2 pic="));
    let report = json(&d.path().join("report.json"));
    assert_eq!(report["command"], "estimate");
    assert_eq!(report["config_digest"].as_str().unwrap().len(), 64);
    let m = ReturnMatrix::read_csv(&d.path().join("returns.csv")).unwrap();
    assert_eq!((m.n(), m.m()), (50, 20));
    let again = compute_report(&m, &MetricOptions::default()).unwrap();
    assert_eq!(report["result"]["pic"].as_f64().unwrap().to_bits(), again.pic.to_bits());
    assert_eq!(report["result"]["poic"].as_f64().unwrap().to_bits(), again.poic.to_bits());
    assert_eq!(report["result"]["provenance"]["master_seed"], 5);
}

#[test]
fn single_prior_sweep_matches_estimate() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("one.toml");
    std::fs::write(
        &cfg,
        "[policy]\nkind = \"mlp\"\narch = { hidden_layers = [4], use_bias = true }\nprior = { family = \"uniform\" }\n\n\
         [bag]\nlayers = [[4]]\npriors = [{ family = \"uniform\" }]\nbias = [true]\n",
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let common = ["--config", c, "--env", "cartpole", "--n", "12", "--m", "6", "--seed", "9"];
    let est = d.path().join("est");
    let sw = d.path().join("sw");
    assert_eq!(pic(&[&["estimate"][..], &common].concat(), &est).0, 0);
    assert_eq!(pic(&[&["sweep"][..], &common].concat(), &sw).0, 0);
    let a = json(&est.join("report.json"));
    let b = json(&sw.join("sweep.json"));
    assert_eq!(a["input_digest"], b["input_digest"]);
    assert_eq!(a["result"]["poic"], b["result"]["pooled"]["poic"]);
    assert_eq!(b["result"]["per_prior"].as_array().unwrap().len(), 1);
    assert_eq!(b["result"]["channel_capacity_poic"], b["result"]["pooled"]["poic"]);
}

#[test]
fn es_trace_recomputes_from_saved_matrices() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("es.toml");
    std::fs::write(
        &cfg,
        "[env]\nkind = \"synthetic\"\nhorizon = 2\n\n[metrics]\nbins = 1000\n\n[output]\nsave_matrices = true\nsvg = true\n\n\
         [es]\nsigma = 1.0\npopulation = 10\nepisodes_per_particle = 8\nepochs = 5\n",
    )
    .unwrap();
    assert_eq!(pic(&["train-es", "--config", cfg.to_str().unwrap()], d.path()).0, 0);
    let mut rdr = csv::Reader::from_path(d.path().join("es_trace.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    let opts = MetricOptions { bins: 1000, ..Default::default() };
    for row in &rows {
        let m = ReturnMatrix::read_csv(&d.path().join(format!("es_trace/epoch_{}.csv", &row[0]))).unwrap();
        let r = compute_report(&m, &opts).unwrap();
        assert_eq!(&row[3], format!("{:?}", r.poic));
        assert_eq!(&row[2], format!("{:?}", r.pic));
    }
    assert!(std::fs::read_to_string(d.path().join("es_poic.svg")).unwrap().contains("<polyline"));

    std::fs::write(&cfg, "[env]\nkind = \"synthetic\"\nhorizon = 2\n\n[es]\nepochs = 0\n").unwrap();
    assert_eq!(pic(&["train-es", "--config", cfg.to_str().unwrap()], d.path()).0, 0);
    assert_eq!(
        std::fs::read_to_string(d.path().join("es_trace.csv")).unwrap().trim(),
        "epoch,mean_return,pic,poic,eta_star"
    );
}

#[test]
fn correlate_prints_and_writes() {
    let d = tempfile::tempdir().unwrap();
    let (code, stdout, _) = pic(&["correlate", "--svg"], d.path());
    assert_eq!(code, 0);
    assert!(
        stdout.lines().any(|l| l.starts_with("score_a") && l.contains("poic") && l.contains("R=0.807")),
        "{stdout}"
    );
    assert!(d.path().join("poic_vs_score.svg").exists());
    let (code, stdout, _) = pic(&["correlate", "--builtin", "cartpole_noise"], d.path());
    assert_eq!(code, 0);
    assert!(stdout.contains("poic"));
}

#[test]
fn score_and_shaping_and_prop1() {
    let d = tempfile::tempdir().unwrap();
    let bag = d.path().join("bag.toml");
    std::fs::write(&bag, "[score]\nseeds = [0]\nalgorithms = [{ algorithm = \"random_search\", k = 20 }]\n").unwrap();
    let (code, stdout, err) =
        pic(&["score", "--config", bag.to_str().unwrap(), "--env", "synthetic", "--n", "30", "--m", "10"], d.path());
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("score(algorithm)="));
    let s = json(&d.path().join("score.json"));
    let sa = s["result"]["score_algorithm"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&sa));
    let csv = std::fs::read_to_string(d.path().join("bag.csv")).unwrap();
    assert!(csv.starts_with("algorithm,hyperparams,env,mean_return\nrandom_search,k=20,synthetic_t3,"));

    assert_eq!(pic(&["shaping-sweep", "--n", "6", "--m", "3"], d.path()).0, 0);
    let shaping = std::fs::read_to_string(d.path().join("shaping.csv")).unwrap();
    assert_eq!(shaping.lines().count(), 17);
    assert!(shaping.starts_with("family,params,pic,poic"));

    let (code, stdout, _) =
        pic(&["prop1", "--mu1", "1", "--sigma1", "1", "--mu2", "0", "--sigma2", "1", "--trials", "20000"], d.path());
    assert_eq!(code, 0);
    assert!(stdout.starts_with("bound=0.286"), "{stdout}");
    assert_eq!(pic(&["prop1", "--mu1", "1", "--sigma1", "0", "--mu2", "0", "--sigma2", "1"], d.path()).0, 2);
}

#[test]
fn small_and_degenerate_cases() {
    let d = tempfile::tempdir().unwrap();
    let (code, stdout, _) = pic(&["estimate", "--env", "constant", "--n", "5", "--m", "5"], d.path());
    assert_eq!(code, 0);
    assert!(stdout.contains("pic=0.000000 poic=0.000000"), "{stdout}");

    let (code, stdout, _) =
        pic(&["prop1", "--mu1", "0.3", "--sigma1", "1", "--mu2", "0.3", "--sigma2", "2", "--trials", "100"], d.path());
    assert_eq!(code, 0);
    assert!(stdout.starts_with("bound=1.000000"), "{stdout}");

    let cfg = d.path().join("bag.toml");
    std::fs::write(
        &cfg,
        "[bag]\nlayers = [[], [4]]\npriors = [{ family = \"gaussian\" }, { family = \"xavier_uniform\" }]\n",
    )
    .unwrap();
    assert_eq!(
        pic(&["sweep", "--config", cfg.to_str().unwrap(), "--env", "cartpole", "--n", "8", "--m", "4"], d.path()).0,
        0
    );
    let s = json(&d.path().join("sweep.json"));
    let per = s["result"]["per_prior"].as_array().unwrap();
    assert_eq!(per.len(), 8);
    let cc = s["result"]["channel_capacity_poic"].as_f64().unwrap();
    assert!(per.iter().all(|r| r["poic"].as_f64().unwrap() <= cc));
    assert_eq!(std::fs::read_to_string(d.path().join("per_prior.csv")).unwrap().lines().count(), 9);

    let es = d.path().join("es.toml");
    std::fs::write(&es, "[env]\nkind = \"synthetic\"\nhorizon = 3\n\n[es]\nsigma = 1.0\npopulation = 4\nepisodes_per_particle = 4\nepochs = 2\nmu0_sweep = [-5.0, -4.0, -3.0, 0.0]\n\n[metrics]\nbins = 100\n").unwrap();
    assert_eq!(pic(&["train-es", "--config", es.to_str().unwrap()], d.path()).0, 0);
    for name in ["es_trace_mum5", "es_trace_mum4", "es_trace_mum3", "es_trace_mu0"] {
        assert!(d.path().join(format!("{name}.csv")).exists(), "{name}");
    }
}
