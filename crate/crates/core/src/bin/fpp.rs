fn main() {
    std::process::exit(fpp_core::cli::run(std::env::args_os()));
}
