fn main() {
    std::process::exit(seqopf::cli::main_with_args(std::env::args_os()));
}
