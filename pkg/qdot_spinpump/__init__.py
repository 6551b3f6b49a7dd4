"""
Simulación de bombeo y rebombeo de espín en un punto cuántico (modelo de 4 niveles)
y reducción de espectros de fotoluminiscencia en campo magnético.
"""

__version__ = "1.0.0"
