//! Emitting the three standard figure datasets through the library API
//! (the `gqtoda figures` subcommand wraps the same path).
//!
//! Run with: `cargo run --example figure_data -- /tmp/gqtoda-figures`

use gqtoda::cli::{run_command, Flags};

fn main() {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "/tmp/gqtoda-figures".to_string());
    let flags = Flags {
        out_dir: Some(out.clone().into()),
        ..Flags::default()
    };
    match run_command("figures", &flags, None) {
        Ok(_) => {
            println!("figure datasets written to {out}");
            println!("render with: gnuplot {out}/plot.gp");
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    }
}
