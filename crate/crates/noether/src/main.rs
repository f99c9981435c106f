fn main() {
    std::process::exit(noether::cli::main(std::env::args_os()));
}
