use clap::Parser;
use gauss_galerkin::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli, &mut std::io::stdout().lock()) {
        eprintln!("ggfilter: {e}");
        std::process::exit(e.exit_code());
    }
}
