fn main() {
    println!("ppgvc");
}
