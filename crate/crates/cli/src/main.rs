use clap::Parser;

fn main() {
    let cli = pinn_ode_cli::Cli::parse();
    if let Err(e) = pinn_ode_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
