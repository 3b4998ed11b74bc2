from setuptools import setup
import regionflow

myversion = regionflow.__version__

setup(name='regionflow',
      version=myversion,
      description='Service region delineation from patient flows by modularity optimization',
      author='regionflow developers',
      url='',
      packages=['regionflow'],
      scripts = ['bin/regionflow'],
      install_requires=['numpy','scipy','pandas>=1.5','shapely','networkx','scikit-learn'],
)
