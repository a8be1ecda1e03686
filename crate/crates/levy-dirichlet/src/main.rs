use clap::Parser;
use levy_dirichlet::cli::{run, Subcommand};

/// Dirichlet-form and KL-risk experiments for symmetric Lévy location
/// families. Every configuration key can be given as `--key value`.
#[derive(Parser, Debug)]
#[command(author, version)]
struct Args {
    #[arg(value_enum)]
    command: Subcommand,

    /// `--config PATH` and `--key value` overrides.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    rest: Vec<String>,
}

fn main() {
    let args = Args::parse();
    std::process::exit(run(args.command, &args.rest));
}
