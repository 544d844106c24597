fn main() {
    std::process::exit(bbcalib::cli::run(std::env::args_os()));
}
