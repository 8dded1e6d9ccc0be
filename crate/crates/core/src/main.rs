fn main() {
    std::process::exit(warpconv::cli::main_from(std::env::args_os()));
}
