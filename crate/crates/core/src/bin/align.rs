fn main() {
    std::process::exit(align_core::cli::run(std::env::args_os()));
}
