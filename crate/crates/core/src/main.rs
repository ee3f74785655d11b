fn main() {
    std::process::exit(nsgeom::cli::main_with_args(std::env::args_os()));
}
