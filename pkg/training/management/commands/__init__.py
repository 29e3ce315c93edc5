# management/commands package
