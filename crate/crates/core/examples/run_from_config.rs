//! Drives the experiment runner from TOML, as the `parastab run` command does.

use parastab::runner::{run, RunConfig};

fn main() -> parastab::Result<()> {
    let out = std::env::temp_dir().join("parastab-example");
    let text = format!(
        r#"
command = "carleman"
preset = "coupled2"
bc = "robin"
p = 0.5
nx = 80
nt = 800
s = [2.0, 4.0, 8.0]
lambda = [2.0, 4.0]
out = "{}"
"#,
        out.display()
    );
    let outcome = run(RunConfig::from_toml(&text, "inline")?)?;
    print!("{}", outcome.summary());
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
