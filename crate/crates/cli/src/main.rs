use clap::Parser;
use headsplat_cli::{init_threads, run, Cli, CliError};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            fail(CliError::usage(first.trim_start_matches("error: ")))
        }
    };
    if let Err(e) = init_threads().and_then(|_| run(cli)) {
        fail(e);
    }
}

fn fail(e: CliError) -> ! {
    eprintln!("{}", e.line());
    std::process::exit(e.kind.exit_code());
}
