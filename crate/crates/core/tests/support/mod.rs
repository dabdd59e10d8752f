pub mod oracle;
pub mod recursion;
pub mod sim;
