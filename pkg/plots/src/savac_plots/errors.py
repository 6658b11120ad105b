class PlotError(Exception):
    """Any failure turning a CSV file into a figure."""
