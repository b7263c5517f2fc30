use clap::Parser;
use damq_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{}", out.text);
            if let Some(diag) = out.diagnostic {
                eprintln!("{diag}");
            }
            std::process::exit(out.status);
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
