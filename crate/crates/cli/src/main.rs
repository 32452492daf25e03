use clap::Parser;
use evla_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            let failed = report.failed_checks();
            if !failed.is_empty() {
                for c in failed {
                    eprintln!("evla: check `{}` failed: {} (want {})", c.name, c.value, c.rule);
                }
                std::process::exit(4);
            }
        }
        Err(e) => {
            eprintln!("evla: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
