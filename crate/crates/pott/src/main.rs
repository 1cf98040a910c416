use clap::Parser;
use pott::cli::{run, Cli};

fn main() {
    // clap handles --help/--version and prints usage errors itself; its
    // error exit code is overridden to 2 so every bad invocation lands there.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code());
    }
}
