//! Drive the `spatex` pipeline from a config file: simulate, fit, diagnose.

use spatial_extremes::cli::run;

const CONFIG: &str = r#"
seed = 3
[data]
observations = "sim/simulations.csv"
stations = "stations.csv"
scale = "raw"
[model]
model = "hw"
delta = 0.6
cov = { phi = 1.0, nu = 1.0 }
[simulate]
n = 300
[fit]
u = 0.9
free = ["delta"]
restarts = 0
[diagnose]
levels = [0.9, 0.95]
max_lag = 2
nsim = 1000
"#;

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let root = dir.path();
    std::fs::write(root.join("stations.csv"), "id,x,y\na,0,0\nb,0.5,0\nc,0,0.5\n").unwrap();
    std::fs::write(root.join("run.toml"), CONFIG).unwrap();
    let config = root.join("run.toml");
    for (cmd, out) in [("simulate", "sim"), ("fit", "fit"), ("diagnose", "diag")] {
        let out = root.join(out);
        let code = run(["spatex", cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        println!("spatex {cmd} -> exit {code}");
        if code != 0 {
            std::process::exit(code);
        }
    }
    print!("{}", std::fs::read_to_string(root.join("fit/estimates.csv")).unwrap());
}
