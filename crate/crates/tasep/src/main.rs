//! Binary entry point; all logic lives in [`tasep::cli`].

fn main() {
    std::process::exit(tasep::cli::main());
}
