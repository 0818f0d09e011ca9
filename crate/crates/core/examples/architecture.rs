//! Layer table of the residual network: output shape and parameter count
//! per row.
//!
//! `cargo run --release --example architecture [full|desk|tiny] [CLASSES]`

use svtk::model::{Network, NetworkConfig};

fn main() -> svtk::Result<()> {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "full".into());
    let classes = args.next().map_or(97, |s| s.parse().expect("class count"));
    let config = match preset.as_str() {
        "desk" => NetworkConfig::desk(classes),
        "tiny" => NetworkConfig::tiny(classes),
        _ => NetworkConfig::full(classes),
    };
    let net = Network::<f32>::build(config, 0)?;
    let counts = net.count_parameters()?;
    println!("{:<10} {:<16} {:>12}", "layer", "output", "#parameters");
    for r in &counts.rows {
        let shape: Vec<String> = r.output.iter().map(|d| d.to_string()).collect();
        println!("{:<10} {:<16} {:>11.1}K", r.row, shape.join("x"), r.params as f64 / 1e3);
    }
    println!("{:<10} {:<16} {:>11.1}K", "total", "", counts.total as f64 / 1e3);
    Ok(())
}
