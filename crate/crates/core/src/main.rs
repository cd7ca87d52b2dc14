fn main() {
    std::process::exit(sl_solv::cli::run(std::env::args_os()));
}
