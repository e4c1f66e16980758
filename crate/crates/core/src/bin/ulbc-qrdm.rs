fn main() {
    std::process::exit(ulbc_qrdm::cli::main_with_args(std::env::args_os()));
}
