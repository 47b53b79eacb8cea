fn main() {
    std::process::exit(seqsteer::cli::main_with_args(std::env::args_os()));
}
