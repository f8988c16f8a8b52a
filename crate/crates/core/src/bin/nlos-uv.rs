use clap::Parser;
use nlos_uv::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(cli.command, &cli.common) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
        }
        Err(e) => {
            eprintln!("nlos-uv {}: {e}", cli.command.name());
            std::process::exit(e.exit_code());
        }
    }
}
