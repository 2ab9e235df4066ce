fn main() {
    std::process::exit(sasa::cli::dispatch(std::env::args_os()));
}
