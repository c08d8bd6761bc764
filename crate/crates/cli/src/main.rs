use clap::Parser;

fn main() {
    let cli = lti_cli::Cli::parse();
    if let Err(e) = lti_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(lti_cli::exit_code(&e));
    }
}
