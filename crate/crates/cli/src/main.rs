use clap::Parser;
use zoh_funnel_cli::{run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            // usage errors are configuration errors; --help and --version succeed
            std::process::exit(if err.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok(outcome) => {
            if !outcome.stdout.is_empty() {
                println!("{}", outcome.stdout);
            }
            std::process::exit(outcome.code);
        }
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
