fn main() {
    std::process::exit(skewgraph::cli::main_with_args(std::env::args_os()));
}
