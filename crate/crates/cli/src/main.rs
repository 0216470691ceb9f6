use clap::Parser;

fn main() {
    let cli = pseudorbit_cli::Cli::parse();
    match pseudorbit_cli::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}
