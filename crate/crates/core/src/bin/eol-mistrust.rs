fn main() {
    std::process::exit(eol_mistrust::cli::main_with_args(std::env::args_os()));
}
