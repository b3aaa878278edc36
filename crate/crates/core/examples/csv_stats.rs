// Drives the command-line interface on a small CSV file.

use std::io::Write;

pub fn run_example() -> std::io::Result<()> {
    let path = std::env::temp_dir().join(format!("hotelling-rao-example-{}.csv", std::process::id()));
    let mut f = std::fs::File::create(&path)?;
    writeln!(f, "response,covariate_a,covariate_b")?;
    for (i, row) in [[0.9, 1.2, -0.3], [1.4, 0.8, 0.1], [0.2, 1.9, 0.4], [1.1, 1.1, -0.2], [0.7, 0.4, 0.6], [1.8, 1.3, 0.0]].iter().enumerate() {
        writeln!(f, "{},{},{}", row[0], row[1], row[2] + 0.01 * i as f64)?;
    }
    drop(f);

    let file = path.to_string_lossy().into_owned();
    let mut out = Vec::new();
    let mut err = Vec::new();
    for format in ["--tsv", "--json"] {
        let code = hotelling_rao::cli::run(["hotelling-rao", "stats", &file, "--p1", "1", format], &mut out, &mut err);
        assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
    }
    print!("{}", String::from_utf8_lossy(&out));
    std::fs::remove_file(&path)
}

fn main() -> std::io::Result<()> {
    run_example()
}
