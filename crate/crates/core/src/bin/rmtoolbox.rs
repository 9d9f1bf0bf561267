fn main() {
    std::process::exit(rmtoolbox::cli::main_with_args(std::env::args_os()));
}
