//! Drives the command-line front end on a bundled config:
//! `cargo run --example run_config -- covariance examples/configs/iid_square_product.toml`.

fn main() {
    let mut args: Vec<String> = std::env::args().collect();
    if args.len() == 1 {
        let config = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/iid_square_product.toml");
        args.extend(["covariance".to_string(), config.to_string()]);
    }
    std::process::exit(noncon::cli::run(args));
}
