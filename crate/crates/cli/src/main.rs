use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = effx_cli::Cli::parse();
    match effx_cli::run(&cli) {
        Ok(m) => {
            for s in &m.stages {
                let how = if s.cached { "cached".to_string() } else { format!("{:.2}s", s.seconds) };
                println!("{:<9} {how}", s.stage);
            }
            println!("manifest {}", m.manifest_hash);
        }
        Err(e) => {
            eprintln!("effx: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
