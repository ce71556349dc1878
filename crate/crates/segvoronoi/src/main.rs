fn main() {
    std::process::exit(segvoronoi::cli::main_with_args(std::env::args_os()));
}
