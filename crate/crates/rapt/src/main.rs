use clap::Parser;

fn main() {
    let cli = rapt::cli::Cli::parse();
    if let Err(err) = rapt::cli::execute(cli) {
        let details = serde_json::json!({ "error": err.kind(), "message": err.to_string() });
        eprintln!("{details}");
        std::process::exit(1);
    }
}
