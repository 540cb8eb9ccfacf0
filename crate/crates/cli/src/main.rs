use clap::Parser;

fn main() {
    let cli = cpenv_cli::Cli::parse();
    match cpenv_cli::run(cli) {
        Ok(summary) => print!("{summary}"),
        Err(e) => {
            eprintln!("cpenv: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
