use clap::Parser;

fn main() {
    let cli = fer_cli::Cli::parse();
    if let Err(e) = fer_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
