fn main() {
    std::process::exit(suvclip::cli::run(std::env::args_os()));
}
