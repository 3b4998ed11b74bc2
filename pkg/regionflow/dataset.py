#!/usr/bin/env python

#stdlib imports
import abc


class RegionFlowException(Exception):
    """
    Class to represent errors in the regionflow package.

    The optional code is a short machine-readable string (i.e., 'empty_input')
    which the command line tools report when they exit with status 2.
    """
    def __init__(self,value,code='input_error',details=None):
        self.value = value
        self.code = code
        self.details = details or {}
    def __str__(self):
        return repr(self.value)

class RegionFlowWarning(Warning):
    """
    Class to represent warnings in the regionflow package.
    """
    def __init__(self,value):
        self.value = value
    def __str__(self):
        return repr(self.value)

class DataSet(object):
    """
    Abstract base for the tabular inputs (flows, hospitals, zone attributes).
    Subclasses keep their rows in a pandas DataFrame.
    """
    #This should be a @classmethod in subclasses
    @abc.abstractmethod
    def loadFromCSV(filename):
        """
        Load data from a CSV file into a DataSet subclass.

        :param filename:
           File where data is stored.
        :raises NotImplementedError:
           Always for this base class.
        """
        raise NotImplementedError('loadFromCSV method not implemented in base class')

    @abc.abstractmethod
    def save(self,filename):
        """
        Save the data contained in the DataSet to a CSV file.

        :param filename:
           Where file containing data should be written.
        """
        raise NotImplementedError('save method not implemented in base class')

    @abc.abstractmethod
    def getData(self,getCopy=False):
        """
        Return a reference to or copy of the internal DataFrame.

        :param getCopy:
           True indicates that the user wants a copy of the data, not a reference to it.
        :returns:
          A reference to or copy of a pandas DataFrame.
        """
        raise NotImplementedError('getData method not implemented in base class')

    def __len__(self):
        """Return the number of rows in the DataSet.
        """
        return len(self.getData())

    @staticmethod
    def checkColumns(dataframe,reqfields,name):
        """Make sure a DataFrame carries all of the required columns.

        :param dataframe:
          pandas DataFrame read from a file.
        :param reqfields:
          Sequence of required column names.
        :param name:
          Description of the file used in the error message.
        :raises RegionFlowException:
          When any of the required columns are missing.
        """
        missing = [col for col in reqfields if col not in dataframe.columns]
        if len(missing):
            raise RegionFlowException('%s is missing required columns: %s' % (name,str(missing)),
                                      code='malformed_header',details={'missing':missing})

def saveFrame(dataframe,filename,comment=None):
    """Write a DataFrame as CSV, optionally preceded by a single comment line.

    :param dataframe:
      pandas DataFrame to write (index is not written).
    :param filename:
      Output CSV file name.
    :param comment:
      String written after '# ' on the first line, or None.
    """
    with open(filename,'wt',newline='') as f:
        if comment is not None:
            f.write('# %s\n' % comment)
        dataframe.to_csv(f,index=False,lineterminator='\n')
