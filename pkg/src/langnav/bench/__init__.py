"""Suite generation, execution, metrics, reports and rendering."""
