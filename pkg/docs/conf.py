# Sphinx configuration of the HydroMission documentation

import os, sys
sys.path.insert(0, os.path.abspath('../src'))

project = 'HydroMission'
copyright = '2023, Rodriguez Esteban (Z3ZEL)'
author = 'Rodriguez Esteban (Z3ZEL)'
release = '0.1.0'

extensions = [
    'sphinx.ext.napoleon',
    'sphinx.ext.autodoc',
    'sphinx_autodoc_typehints',
    # README.md is pulled into the index with mdinclude
    'm2r',
]
autoclass_content = "both"
add_module_names = False
html_show_sourcelink = False

html_theme = 'sphinx_rtd_theme'
