fn main() {
    std::process::exit(textgrid::app::main_with_args(std::env::args_os()));
}
