fn main() {
    std::process::exit(fracdeg::cli::dispatch(std::env::args_os()));
}
