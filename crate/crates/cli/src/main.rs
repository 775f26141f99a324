use clap::Parser;
use madc_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("{}", err.to_json());
            std::process::exit(1);
        }
    }
}
