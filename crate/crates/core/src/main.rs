fn main() {
    if let Err(e) = wlsh::cli::run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
